"""Estimator-driven variable step selection.

Each trial step is accepted when ``2 T^alpha / Gamma(alpha+1) * E_n <= eps^2``,
with ``E_n`` the per-step indicator of :func:`fracflow.estimate.tilde_step`.
Rejected trials are retried with a smaller step; comfortably accepted ones
let the next trial grow.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .energy import ProxConfig
from .errors import ConfigError, FloorReached, StepBudget
from .estimate import tilde_step
from .flow import FlowProblem, FlowResult, Stepper


@dataclass(frozen=True)
class AdaptiveConfig:
    epsilon: float
    tau_init: float | None = None  # default min(tau_max, T/64)
    tau_min: float = 1e-12
    tau_max: float | None = None  # default T
    growth: float = 2.0
    shrink: float = 0.5
    slack: float = 0.25
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not (0.0 < self.shrink < 1.0 < self.growth):
            raise ConfigError("need 0 < shrink < 1 < growth")
        if self.tau_max is not None and not self.tau_min < self.tau_max:
            raise ConfigError("need tau_min < tau_max")
        if not self.tau_min > 0:
            raise ConfigError("tau_min must be positive")
        if not (0.0 <= self.slack <= 1.0):
            raise ConfigError("slack must lie in [0, 1]")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    t: float
    tau: float
    estimator: float
    criterion: float
    rejections: int


def adaptive_solve(
    problem: FlowProblem,
    T: float,
    cfg: AdaptiveConfig,
    prox_cfg: ProxConfig = ProxConfig(),
    q: int = 4,
) -> tuple[FlowResult, list[StepRecord]]:
    if not T > 0:
        raise ConfigError("T must be positive")
    tau_max = T if cfg.tau_max is None else min(cfg.tau_max, T)
    if not cfg.tau_min < tau_max:
        raise ConfigError("need tau_min < tau_max")
    tau = min(tau_max, T / 64) if cfg.tau_init is None else min(cfg.tau_init, tau_max)
    alpha = problem.alpha
    scale = 2.0 * T**alpha / math.gamma(alpha + 1.0)
    target = cfg.epsilon**2
    E = problem.energy

    start = time.perf_counter()
    st = Stepper(problem, prox_cfg, q, capacity=256)
    history: list[StepRecord] = []
    phi_prev = E.value(st.U_last)
    rejections = 0
    while st.t < T:
        t0 = st.t
        t1 = t0 + tau
        # clip the final step, and absorb slivers left by rounding
        if t1 >= T or T - t1 <= 1e-12 * T:
            t1 = T
        tr = st.trial(t1)
        phi_n = E.value(tr.U)
        En = tilde_step(E, st.U_last, tr.U, tr.V, tr.F, tr.psi, phi_prev, phi_n)
        crit = scale * En
        if crit <= target:
            st.commit(tr)
            history.append(StepRecord(t=t1, tau=t1 - t0, estimator=En, criterion=crit, rejections=rejections))
            rejections = 0
            phi_prev = phi_n
            if len(history) >= cfg.max_steps and st.t < T:
                raise StepBudget(f"{cfg.max_steps} accepted steps did not reach T = {T}")
            if crit <= cfg.slack * target:
                tau = min(cfg.growth * tau, tau_max)
        else:
            rejections += 1
            tau = cfg.shrink * (t1 - t0)
            if tau < cfg.tau_min:
                raise FloorReached(f"step below tau_min = {cfg.tau_min:g} at t = {t0:.6g} (criterion {crit:.3e})")
    return st.result(time.perf_counter() - start), history
