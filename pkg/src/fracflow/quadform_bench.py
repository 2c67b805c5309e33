"""Quadratic-form energies ``Phi(w) = w.A w / 2``: the linear regime with rate ``tau^alpha``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import ProxConfig, QuadraticForm
from .flow import FlowProblem, FlowResult, Forcing, interpolate_result, solve_flow
from .partition import uniform_partition
from .special import lp_alpha_norm, mittag_leffler, sample_times


@dataclass(frozen=True, eq=False)
class QuadFormProblem:
    A: np.ndarray
    u0: np.ndarray
    forcing: Forcing = None
    energy: QuadraticForm = field(init=False, repr=False)

    def __post_init__(self):
        E = QuadraticForm(self.A)  # validates symmetry and semidefiniteness
        u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))
        if u0.shape != (E.dim,):
            raise ValueError(f"u0 must have length {E.dim}")
        object.__setattr__(self, "A", E.A)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "energy", E)

    def seminorm(self, w) -> float:
        return self.energy.seminorm(w)

    def flow_problem(self, alpha: float) -> FlowProblem:
        return FlowProblem(alpha, self.energy, self.u0, forcing=self.forcing)


def eigen_reference(problem: QuadFormProblem, alpha: float):
    """Exact solution for zero forcing, one Mittag-Leffler factor per eigenmode."""
    if problem.forcing is not None:
        raise ValueError("the eigen-expansion reference needs zero forcing")
    mu, Q = np.linalg.eigh(problem.A)
    mu = np.maximum(mu, 0.0)
    coef = Q.T @ problem.u0

    def ref(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        z = -np.outer(t**alpha, mu)
        modes = mittag_leffler(alpha, z.ravel()).reshape(z.shape)
        return (modes * coef) @ Q.T

    return ref


def seminorm_alpha_norm(problem: QuadFormProblem, result: FlowResult, p: float = 2.0, m: int = 16) -> float:
    """Weighted-in-time ``L^p`` norm of the discrete derivative measured in the seminorm."""
    V = result.V
    vals = np.sqrt(np.maximum(np.einsum("ij,ij->i", V @ problem.A, V), 0.0))
    return lp_alpha_norm(result.partition, result.alpha, p, vals, m=m)


@dataclass(frozen=True)
class RateTable:
    tau: np.ndarray
    error: np.ndarray
    rate: np.ndarray  # first entry nan
    order: float  # least-squares slope of log error against log tau


def fit_order(tau, err) -> float:
    """Least-squares slope of ``log err`` against ``log tau``; ``nan`` if any error is zero."""
    err = np.asarray(err, dtype=float)
    if np.any(err <= 0):
        return math.nan
    return float(np.polyfit(np.log(tau), np.log(err), 1)[0])


def run_quadform_rate(
    problem: QuadFormProblem,
    alpha: float,
    levels,
    T: float = 1.0,
    reference: str = "refined",
    samples: int = 4,
    cfg: ProxConfig = ProxConfig(),
) -> RateTable:
    """Sup-in-time interpolant errors on uniform partitions with ``N`` in ``levels``.

    ``reference="refined"`` compares against a run with four times the
    finest ``N``; ``reference="eigen"`` uses the exact modal solution.
    """
    levels = sorted(int(N) for N in levels)
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    fp = problem.flow_problem(alpha)
    if reference == "refined":
        fine = solve_flow(fp, uniform_partition(T, 4 * levels[-1]), cfg)

        def ref(t):
            return interpolate_result(fine, t)

    elif reference == "eigen":
        ref = eigen_reference(problem, alpha)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    taus, errs = [], []
    for N in levels:
        P = uniform_partition(T, N)
        res = solve_flow(fp, P, cfg)
        ts = sample_times(P, samples)
        errs.append(float(np.max(np.linalg.norm(ref(ts) - interpolate_result(res, ts), axis=1))))
        taus.append(T / N)
    taus, errs = np.array(taus), np.array(errs)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.concatenate([[np.nan], np.log(errs[:-1] / errs[1:]) / np.log(taus[:-1] / taus[1:])])
    return RateTable(tau=taus, error=errs, rate=rate, order=fit_order(taus, errs))
