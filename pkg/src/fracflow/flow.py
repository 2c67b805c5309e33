"""Fractional minimizing-movements time stepper.

Step ``n`` solves the resolvent inclusion

    c_n U_n + dPhi(U_n) + Psi_n(U_n)  contains  F_n + c_n W_n,

where ``c_n = Gamma(alpha+1) tau_n**-alpha`` and
``W_n = U_0 + sum_{i<n} K[n, i] V_i`` is the contribution of the history
to ``U_n``. The discrete Caputo value is recovered as ``V_n = c_n (U_n - W_n)``.
This is algebraically the same recursion as applying the rows of the
inverse kernel matrix, but it only ever needs row ``n`` of the kernel itself.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .caputo import interpolate_from_derivative, kernel_row
from .energy import Energy, Perturbation, ProxConfig, gauss_points, prox_solve
from .errors import (
    BadOrder,
    DimensionMismatch,
    DomainEscape,
    IllPosed,
    NoConvergence,
    ProxFailure,
    StepConditionViolated,
)
from .partition import Partition, make_partition


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Forcing already given by one value per interval of ``partition``."""

    partition: Partition
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.partition.N:
            raise DimensionMismatch(f"need {self.partition.N} interval values, got {v.shape[0]}")
        object.__setattr__(self, "values", v)

    def __call__(self, t: float) -> np.ndarray:
        n = int(np.searchsorted(self.partition.nodes, t, side="left"))
        return self.values[min(max(n, 1), self.partition.N) - 1]


Forcing = Callable[[float], np.ndarray] | PiecewiseConstant | None


@dataclass(frozen=True, eq=False)
class FlowProblem:
    alpha: float
    energy: Energy
    u0: np.ndarray
    forcing: Forcing = None
    perturbation: Perturbation | None = None
    U0: np.ndarray | None = None  # discrete initial value, defaults to u0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise BadOrder(f"alpha must lie in (0, 1), got {self.alpha!r}")
        u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))
        object.__setattr__(self, "u0", u0)
        if self.U0 is not None:
            U0 = np.atleast_1d(np.asarray(self.U0, dtype=float))
            if U0.shape != u0.shape:
                raise DimensionMismatch("U0 and u0 must have the same shape")
            object.__setattr__(self, "U0", U0)
        for w in (u0, self.initial):
            if not math.isfinite(self.energy.value(w)):
                raise DomainEscape("initial state lies outside the energy domain")

    @property
    def dim(self) -> int:
        return len(self.u0)

    @property
    def initial(self) -> np.ndarray:
        return self.u0 if self.U0 is None else self.U0


def _interval_average(f: Forcing, a: float, b: float, q: int, d: int) -> np.ndarray:
    if f is None:
        return np.zeros(d)
    if isinstance(f, PiecewiseConstant):
        P = f.partition
        n = int(np.searchsorted(P.nodes, b, side="left"))
        if n <= P.N and P.nodes[n] == b and P.nodes[n - 1] == a:
            return f.values[n - 1]
        # interval does not coincide with the forcing's own partition
        lo = max(int(np.searchsorted(P.nodes, a, side="right")), 1)
        hi = min(n, P.N)
        total = np.zeros(d)
        for k in range(lo, hi + 1):
            seg = min(b, P.nodes[k]) - max(a, P.nodes[k - 1])
            if seg > 0:
                total += seg * f.values[k - 1]
        return total / (b - a)
    ts, wts = gauss_points(a, b, q)
    return sum(w * np.atleast_1d(np.asarray(f(t), dtype=float)) for t, w in zip(ts, wts))


def average_forcing(f: Forcing, P: Partition, q: int = 4, dim: int = 1) -> np.ndarray:
    """Interval means ``F_n`` of ``f``, shape ``(N, d)``; ``q``-point Gauss-Legendre."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if isinstance(f, PiecewiseConstant) and f.partition.N == P.N and np.array_equal(f.partition.nodes, P.nodes):
        return f.values.copy()
    if f is not None and not isinstance(f, PiecewiseConstant):
        dim = len(np.atleast_1d(f(P.nodes[1])))
    elif isinstance(f, PiecewiseConstant):
        dim = f.values.shape[1]
    return np.array([_interval_average(f, P.nodes[n - 1], P.nodes[n], q, dim) for n in range(1, P.N + 1)])


@dataclass(frozen=True)
class StepTrial:
    t: float
    U: np.ndarray
    V: np.ndarray
    F: np.ndarray
    residual: float
    psi: np.ndarray | None


class Stepper:
    """Incremental solver state shared by the fixed and adaptive drivers."""

    def __init__(self, problem: FlowProblem, cfg: ProxConfig = ProxConfig(), q: int = 4, capacity: int = 64):
        self.problem = problem
        self.cfg = cfg
        self.q = q
        d = problem.dim
        self.n = 0
        self._nodes = np.zeros(capacity + 1)
        self._U = np.zeros((capacity + 1, d))
        self._U[0] = problem.initial
        self._V = np.zeros((capacity, d))
        self._F = np.zeros((capacity, d))
        self._res = np.zeros(capacity)
        self._psi = np.zeros((capacity, d)) if problem.perturbation is not None else None
        self._g = math.gamma(problem.alpha + 1.0)

    @property
    def t(self) -> float:
        return float(self._nodes[self.n])

    @property
    def U_last(self) -> np.ndarray:
        return self._U[self.n]

    def _grow(self):
        cap = len(self._V)
        self._nodes = np.concatenate([self._nodes, np.zeros(cap)])
        self._U = np.concatenate([self._U, np.zeros_like(self._U[:cap])])
        self._V = np.concatenate([self._V, np.zeros_like(self._V)])
        self._F = np.concatenate([self._F, np.zeros_like(self._F)])
        self._res = np.concatenate([self._res, np.zeros_like(self._res)])
        if self._psi is not None:
            self._psi = np.concatenate([self._psi, np.zeros_like(self._psi)])

    def trial(self, t_new: float) -> StepTrial:
        """Solve step ``n+1`` ending at ``t_new`` without committing it."""
        pb = self.problem
        n = self.n + 1
        if n >= len(self._nodes):
            self._grow()
        a = self.t
        if not t_new > a:
            raise ValueError("steps must advance in time")
        self._nodes[n] = t_new
        alpha = pb.alpha
        row = kernel_row(self._nodes, n, alpha)
        W = pb.initial + row[:-1] @ self._V[: n - 1]
        c = self._g / (t_new - a) ** alpha
        F = _interval_average(pb.forcing, a, t_new, self.q, pb.dim)
        psi_avg = None
        L = 0.0
        if pb.perturbation is not None:
            Pt = pb.perturbation
            L = Pt.lipschitz
            if Pt.time_dependent:
                ts, wts = gauss_points(a, t_new, self.q)

                def psi_avg(w, ts=ts, wts=wts):
                    return sum(wt * Pt(s, w) for s, wt in zip(ts, wts))

            else:
                mid = 0.5 * (a + t_new)

                def psi_avg(w, mid=mid):
                    return Pt(mid, w)

            if L * (t_new - a) ** alpha >= self._g:
                raise StepConditionViolated(
                    f"step {n}: L tau^alpha = {L * (t_new - a) ** alpha:.4g} >= Gamma(alpha+1)"
                )
        try:
            U, res = prox_solve(pb.energy, c, F + c * W, psi_avg, L, self.cfg)
        except (NoConvergence, IllPosed) as exc:
            raise ProxFailure(n, exc) from exc
        V = c * (U - W)
        psi = psi_avg(U) if psi_avg is not None else None
        return StepTrial(t=t_new, U=U, V=V, F=F, residual=res, psi=psi)

    def commit(self, tr: StepTrial):
        n = self.n + 1
        if n >= len(self._nodes):
            self._grow()
        self._nodes[n] = tr.t
        self._U[n] = tr.U
        self._V[n - 1] = tr.V
        self._F[n - 1] = tr.F
        self._res[n - 1] = tr.residual
        if self._psi is not None:
            self._psi[n - 1] = tr.psi
        self.n = n

    def result(self, wall_time: float = 0.0) -> "FlowResult":
        n = self.n
        P = make_partition(self._nodes[: n + 1].copy())
        U = self._U[: n + 1].copy()
        E = self.problem.energy
        return FlowResult(
            problem=self.problem,
            partition=P,
            U=U,
            V=self._V[:n].copy(),
            F=self._F[:n].copy(),
            residuals=self._res[:n].copy(),
            phi=np.array([E.value(u) for u in U]),
            psi=None if self._psi is None else self._psi[:n].copy(),
            wall_time=wall_time,
        )


@dataclass(frozen=True, eq=False)
class FlowResult:
    """Nodal trajectory of one run. ``U`` includes ``U_0`` as its first row."""

    problem: FlowProblem
    partition: Partition
    U: np.ndarray
    V: np.ndarray
    F: np.ndarray
    residuals: np.ndarray
    phi: np.ndarray
    psi: np.ndarray | None = None  # Psi_n(U_n) when perturbed
    wall_time: float = field(default=0.0, compare=False)

    @property
    def alpha(self) -> float:
        return self.problem.alpha

    @property
    def U0(self) -> np.ndarray:
        return self.U[0]

    @property
    def N(self) -> int:
        return self.partition.N

    @property
    def final(self) -> np.ndarray:
        return self.U[-1]


def solve_flow(problem: FlowProblem, P: Partition, cfg: ProxConfig = ProxConfig(), q: int = 4) -> FlowResult:
    """Run the scheme on a fixed partition."""
    if problem.perturbation is not None:
        L = problem.perturbation.lipschitz
        g = math.gamma(problem.alpha + 1.0)
        if L * P.tau_max**problem.alpha >= g:
            raise StepConditionViolated(
                f"L tau_max^alpha = {L * P.tau_max ** problem.alpha:.4g} must be below Gamma(alpha+1) = {g:.4g}"
            )
    start = time.perf_counter()
    st = Stepper(problem, cfg, q, capacity=P.N)
    for n in range(1, P.N + 1):
        tr = st.trial(float(P.nodes[n]))
        st.commit(tr)
    res = st.result(time.perf_counter() - start)
    # keep the caller's node array bit-for-bit
    return FlowResult(**{**res.__dict__, "partition": P})


def interpolate_result(result: FlowResult, t):
    """Continuous interpolant ``U_hat(t)``; shape ``(d,)`` for scalar ``t``."""
    out = interpolate_from_derivative(result.partition, result.alpha, result.U, result.V, t)
    return out[0] if np.ndim(t) == 0 else out
