"""A posteriori error estimators and error measurement against a reference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .energy import Energy, gauss_points, sigma
from .errors import DomainEscape, NotDifferentiable, OutOfRange
from .flow import FlowResult, PiecewiseConstant, interpolate_result
from .partition import Partition, make_partition
from .special import lp_alpha_norm, mittag_leffler, sample_times


def tilde_step(E: Energy, U_prev, U_n, V_n, F_n, psi_n=None, phi_prev=None, phi_n=None) -> float:
    """Single-step indicator ``<V_n - F_n + Psi_n(U_n), U_{n-1} - U_n> + Phi(U_{n-1}) - Phi(U_n)``."""
    d = np.asarray(U_prev) - np.asarray(U_n)
    g = np.asarray(V_n) - np.asarray(F_n)
    if psi_n is not None:
        g = g + psi_n
    pp = E.value(U_prev) if phi_prev is None else phi_prev
    pn = E.value(U_n) if phi_n is None else phi_n
    if not math.isfinite(pp):
        raise DomainEscape("previous state outside the energy domain")
    return float(g @ d) + pp - pn


def estimator_tilde(result: FlowResult) -> np.ndarray:
    """Per-step indicators, shape ``(N,)``; nonnegative up to rounding."""
    U, phi = result.U, result.phi
    if not np.all(np.isfinite(phi)):
        raise DomainEscape("a nodal state lies outside the energy domain")
    g = result.V - result.F
    if result.psi is not None:
        g = g + result.psi
    return np.einsum("ij,ij->i", g, U[:-1] - U[1:]) + phi[:-1] - phi[1:]


def _pointwise(result: FlowResult, t: np.ndarray, n: np.ndarray, Uhat: np.ndarray | None = None) -> np.ndarray:
    if Uhat is None:
        Uhat = interpolate_result(result, t)
    Ub = result.U[n]
    diff = Uhat - Ub
    g = result.V[n - 1] - result.F[n - 1]
    if result.psi is not None:
        g = g + result.psi[n - 1]
    E = result.problem.energy
    return np.einsum("ij,ij->i", g, diff) + E.values(Uhat) - result.phi[n]


def estimator_pointwise(result: FlowResult, t, n=None):
    """Estimator function at ``t``.

    By default ``t`` is assigned to its interval ``(t_{n-1}, t_n]``; passing
    ``n`` explicitly evaluates a one-sided limit, e.g. ``t = t_{n-1}`` with
    interval ``n`` gives the right limit, which equals :func:`estimator_tilde`.
    """
    P = result.partition
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    if n is None:
        if np.any(ta <= 0) or np.any(ta > P.T):
            raise OutOfRange(f"t outside (0, {P.T}]")
        na = P.interval_index(ta)
    else:
        na = np.broadcast_to(np.atleast_1d(np.asarray(n, dtype=int)), ta.shape)
        if np.any(na < 1) or np.any(na > P.N):
            raise OutOfRange("interval index outside 1..N")
        if np.any(ta < P.nodes[na - 1]) or np.any(ta > P.nodes[na]):
            raise OutOfRange("t outside the closure of its interval")
    out = _pointwise(result, ta, na)
    return float(out[0]) if np.ndim(t) == 0 else out


def interval_samples(P: Partition, m: int) -> np.ndarray:
    """``m`` equispaced points per interval including both endpoints, shape ``(N, m)``."""
    if m < 2:
        raise ValueError("m must be >= 2")
    frac = np.arange(m) / (m - 1)
    s = P.nodes[:-1, None] + P.tau[:, None] * frac[None, :]
    s[:, -1] = P.nodes[1:]
    return s


def estimator_samples(result: FlowResult, m: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Sample times ``(N, m)`` and the estimator at each, with left endpoints as right limits."""
    P = result.partition
    S = interval_samples(P, m)
    n = np.repeat(np.arange(1, P.N + 1), m)
    vals = _pointwise(result, S.ravel(), n)
    return S, vals.reshape(S.shape)


def estimator_D(result: FlowResult, m: int = 8) -> np.ndarray:
    """Piecewise-constant upper envelope: per-interval max over ``m`` samples."""
    _, vals = estimator_samples(result, m)
    return vals.max(axis=1)


def _refined(P: Partition, m: int) -> Partition:
    S = interval_samples(P, m)
    return make_partition(np.concatenate([[0.0], S[:, 1:].ravel()]))


def _trapezoid_pc(vals: np.ndarray) -> np.ndarray:
    """Per-subinterval means of endpoint samples, flattened in time order."""
    return (0.5 * (vals[:, :-1] + vals[:, 1:])).ravel()


@dataclass(frozen=True)
class EstimatorTrace:
    tilde: np.ndarray
    sample_times: np.ndarray  # (N, m)
    samples: np.ndarray  # (N, m)
    l1_alpha: float
    forcing_gap: float
    u0_gap: float
    bound: float
    ml_factor: float = 1.0  # E_alpha(2 L T^alpha) when perturbed
    hat_bar_gap: float = 0.0  # ||U_bar - U_hat|| in the weighted L1 norm, perturbed case only


def _forcing_gap(result: FlowResult, R: Partition, m: int, q: int) -> float:
    f = result.problem.forcing
    P = result.partition
    if f is None:
        return 0.0
    if isinstance(f, PiecewiseConstant) and np.array_equal(f.partition.nodes, P.nodes):
        return 0.0
    # interval n of P owns subintervals (n-1)(m-1) .. n(m-1)-1 of R
    owner = np.repeat(np.arange(P.N), m - 1)
    gap = np.empty(R.N)
    for k in range(R.N):
        ts, wts = gauss_points(R.nodes[k], R.nodes[k + 1], q)
        Fn = result.F[owner[k]]
        gap[k] = sum(w * np.linalg.norm(np.atleast_1d(f(t)) - Fn) for t, w in zip(ts, wts))
    return lp_alpha_norm(R, result.alpha, 1.0, gap, m=1)


def aposteriori_bound(result: FlowResult, u0_gap: float | None = None, m: int = 8, q: int = 4) -> EstimatorTrace:
    """Computable upper bound on the sup-in-time error of the continuous interpolant.

    The weighted ``L^1`` norm of the estimator is taken on a refinement with
    ``m - 1`` subintervals per interval, using the trapezoid mean of endpoint
    samples on each subinterval, so the value is an approximation that
    converges as ``m`` grows.
    """
    pb = result.problem
    alpha = result.alpha
    P = result.partition
    if u0_gap is None:
        u0_gap = float(np.linalg.norm(pb.u0 - result.U0))
    S, vals = estimator_samples(result, m)
    R = _refined(P, m)
    l1 = lp_alpha_norm(R, alpha, 1.0, np.maximum(_trapezoid_pc(vals), 0.0), m=1)
    fgap = _forcing_gap(result, R, m, q)
    ga = math.gamma(alpha)
    ml = 1.0
    hb = 0.0
    if pb.perturbation is not None and pb.perturbation.lipschitz > 0:
        L = pb.perturbation.lipschitz
        ml = mittag_leffler(alpha, 2.0 * L * P.T**alpha)
        n = np.repeat(np.arange(1, P.N + 1), m)
        Uh = interpolate_result(result, S.ravel())
        dist = np.linalg.norm(Uh - result.U[n], axis=1).reshape(S.shape)
        hb = lp_alpha_norm(R, alpha, 1.0, _trapezoid_pc(dist), m=1)
        bound = math.sqrt((u0_gap**2 + 2.0 / ga * l1) * ml) + 2.0 / ga * (fgap + L * hb) * ml
    else:
        bound = math.sqrt(u0_gap**2 + 2.0 / ga * l1) + 2.0 / ga * fgap
    return EstimatorTrace(
        tilde=estimator_tilde(result),
        sample_times=S,
        samples=vals,
        l1_alpha=l1,
        forcing_gap=fgap,
        u0_gap=u0_gap,
        bound=bound,
        ml_factor=ml,
        hat_bar_gap=hb,
    )


def _eval_ref(ref: Callable, t: np.ndarray, d: int) -> np.ndarray:
    try:
        out = np.asarray(ref(t), dtype=float)
        if out.shape == (len(t),) and d == 1:
            return out[:, None]
        if out.shape == (len(t), d):
            return out
    except (TypeError, ValueError):
        pass
    return np.array([np.atleast_1d(np.asarray(ref(s), dtype=float)) for s in t])


def error_vs_reference(result: FlowResult, ref: Callable, samples: int = 16, with_sigma: bool = False):
    """``(E_H, E_sigma)`` against a reference trajectory ``ref``.

    ``E_H`` is the maximum norm error of the continuous interpolant over the
    nodes and ``samples - 1`` interior points per interval. ``E_sigma`` is
    ``None`` unless requested; it needs a differentiable energy.
    """
    P = result.partition
    d = result.U.shape[1]
    ts = sample_times(P, samples)
    Uh = interpolate_result(result, ts)
    u = _eval_ref(ref, ts, d)
    EH = float(np.max(np.linalg.norm(u - Uh, axis=1)))
    if not with_sigma:
        return EH, None
    E = result.problem.energy
    if not E.differentiable:
        raise NotDifferentiable("E_sigma needs a differentiable energy")
    S = interval_samples(P, samples + 1)
    n = np.repeat(np.arange(1, P.N + 1), S.shape[1])
    flat = S.ravel()
    Uh = interpolate_result(result, flat)
    u = _eval_ref(ref, np.maximum(flat, 0.0), d)
    Ub = result.U[n]
    vals = np.array([sigma(E, u[k], Uh[k]) + sigma(E, Ub[k], u[k]) for k in range(len(flat))])
    R = _refined(P, S.shape[1])
    integral = lp_alpha_norm(R, result.alpha, 1.0, np.maximum(_trapezoid_pc(vals.reshape(S.shape)), 0.0), m=1)
    return EH, math.sqrt(2.0 / math.gamma(result.alpha) * integral)
