"""Deconvolution discretisation of the Caputo derivative on a general partition.

If ``D^alpha w`` is constant, equal to ``V_i``, on every interval
``(t_{i-1}, t_i]``, then ``w(t_n) = w(0) + sum_i K[n, i] V_i`` with the
lower-triangular kernel matrix

    K[n, i] = ((t_n - t_{i-1})**alpha - (t_n - t_i)**alpha) / Gamma(alpha + 1).

The discrete derivative is ``V = K^{-1} (W - W_0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadIndex, BadOrder, DimensionMismatch, OutOfRange
from .partition import Partition
from .special import abel_apply


def _check_order(alpha: float):
    if not (0.0 < alpha < 1.0):
        raise BadOrder(f"alpha must lie in (0, 1), got {alpha!r}")


def kernel_row(nodes: np.ndarray, n: int, alpha: float) -> np.ndarray:
    """Entries ``K[n, 1..n]`` computed from ``nodes[0..n]`` only.

    Uses ``b**a * expm1(a * log1p(tau / b))`` for the difference of powers so
    that entries far below the diagonal keep full relative accuracy.
    """
    tn = nodes[n]
    b = tn - nodes[1:n + 1]  # t_n - t_i, zero at i = n
    tau = np.diff(nodes[: n + 1])
    out = np.empty(n)
    out[-1] = tau[-1] ** alpha
    bb = b[:-1]
    out[:-1] = bb**alpha * np.expm1(alpha * np.log1p(tau[:-1] / bb))
    return out / math.gamma(alpha + 1.0)


@dataclass(frozen=True)
class CaputoKernel:
    """Kernel matrix for a ``(partition, alpha)`` pair, optionally with its inverse.

    ``K`` and ``Kinv`` are dense ``N x N`` lower-triangular arrays indexed from
    zero, so ``K[n-1, i-1]`` is the entry for nodes ``(n, i)``.
    ``Kinv_col0[n-1] = -sum_j Kinv[n-1, j]`` is the weight of ``W_0``.
    """

    alpha: float
    partition: Partition
    K: np.ndarray = field(repr=False)
    Kinv: np.ndarray | None = field(default=None, repr=False)
    Kinv_col0: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.partition.N

    def require_inverse(self):
        if self.Kinv is None:
            raise ValueError("kernel inverse not computed; call invert_kernel first")


def assemble_kernel(P: Partition, alpha: float) -> CaputoKernel:
    _check_order(alpha)
    N = P.N
    K = np.zeros((N, N))
    for n in range(1, N + 1):
        K[n - 1, :n] = kernel_row(P.nodes, n, alpha)
    return CaputoKernel(alpha=alpha, partition=P, K=K)


def invert_kernel(kernel: CaputoKernel) -> CaputoKernel:
    """Forward substitution, one row of the inverse at a time."""
    K = kernel.K
    N = kernel.N
    Kinv = np.zeros((N, N))
    for n in range(N):
        row = -K[n, :n] @ Kinv[:n, :n]
        row = np.append(row, 1.0)
        Kinv[n, : n + 1] = row / K[n, n]
    col0 = -Kinv.sum(axis=1)
    return replace(kernel, Kinv=Kinv, Kinv_col0=col0)


def caputo_kernel(P: Partition, alpha: float) -> CaputoKernel:
    return invert_kernel(assemble_kernel(P, alpha))


def _as_states(U0, U, N: int):
    U0 = np.atleast_1d(np.asarray(U0, dtype=float))
    U = np.asarray(U, dtype=float)
    if U.ndim == 1 and U0.shape == (1,):
        U = U[:, None]
    if U.ndim != 2 or U.shape[0] != N or U.shape[1] != U0.shape[0]:
        raise DimensionMismatch(f"expected {N} states of dimension {U0.shape[0]}, got shape {U.shape}")
    return U0, U


def discrete_caputo(kernel: CaputoKernel, U0, U) -> np.ndarray:
    """``V_n = sum_{i<=n} Kinv[n, i] (U_i - U_0)`` for the states ``U_1..U_N``.

    Returns shape ``(N, d)``.
    """
    kernel.require_inverse()
    U0, U = _as_states(U0, U, kernel.N)
    return kernel.Kinv @ (U - U0)


def reconstruct(kernel: CaputoKernel, U0, V) -> np.ndarray:
    """Inverse of :func:`discrete_caputo`: ``U_n = U_0 + sum_{i<=n} K[n, i] V_i``."""
    U0, V = _as_states(U0, V, kernel.N)
    return U0 + kernel.K @ V


def _basis_weights(P: Partition, alpha: float, t: float) -> tuple[int, np.ndarray]:
    """``n(t)`` and the fractional-integral weights of ``V_1..V_n`` at ``t``."""
    n = max(int(np.searchsorted(P.nodes, t, side="left")), 1)
    nodes = P.nodes
    w = (t - nodes[:n]) ** alpha
    w[:-1] -= (t - nodes[1:n]) ** alpha
    return n, w / math.gamma(alpha + 1.0)


def basis_eval(kernel: CaputoKernel, i: int, t: float) -> float:
    """Nonlocal basis function ``phi_i(t)``; ``phi_i(t_j) = delta_ij``."""
    kernel.require_inverse()
    P = kernel.partition
    if not (0 <= i <= P.N):
        raise BadIndex(f"basis index {i} outside 0..{P.N}")
    if not (0.0 <= t <= P.T):
        raise OutOfRange(f"t={t!r} outside [0, {P.T}]")
    hit = np.flatnonzero(P.nodes == t)
    if hit.size:
        return 1.0 if hit[0] == i else 0.0
    n, w = _basis_weights(P, kernel.alpha, t)
    if i > n:
        return 0.0
    if i == 0:
        return float(1.0 + w @ kernel.Kinv_col0[:n])
    return float(w[i - 1 :] @ kernel.Kinv[i - 1 : n, i - 1])


def basis_matrix(kernel: CaputoKernel, t) -> np.ndarray:
    """All basis functions at once: row ``k`` holds ``phi_0..phi_N`` at ``t[k]``."""
    kernel.require_inverse()
    P = kernel.partition
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0) or np.any(t > P.T):
        raise OutOfRange(f"t outside [0, {P.T}]")
    out = np.zeros((len(t), P.N + 1))
    for k, s in enumerate(t):
        hit = np.flatnonzero(P.nodes == s)
        if hit.size:
            out[k, hit[0]] = 1.0
            continue
        n, w = _basis_weights(P, kernel.alpha, s)
        out[k, 0] = 1.0 + w @ kernel.Kinv_col0[:n]
        out[k, 1 : n + 1] = w @ kernel.Kinv[:n, :n]
    return out


def interpolate_from_derivative(P: Partition, alpha: float, U, V, t) -> np.ndarray:
    """Continuous interpolant ``U_0 + I^alpha[V_bar](t)`` from nodal data.

    ``U`` holds all nodal states ``U_0..U_N`` with shape ``(N+1, d)`` and ``V``
    the interval derivatives with shape ``(N, d)``. Nodes return ``U_n`` exactly.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0) or np.any(t > P.T):
        raise OutOfRange(f"t outside [0, {P.T}]")
    jumps = np.diff(V, axis=0, prepend=np.zeros((1, V.shape[1])))
    out = U[0] + abel_apply(P.nodes, alpha, t, jumps) / math.gamma(alpha + 1.0)
    idx = np.searchsorted(P.nodes, t)
    at_node = (idx <= P.N) & (P.nodes[np.minimum(idx, P.N)] == t)
    out[at_node] = U[idx[at_node]]
    return out


def interpolant_eval(kernel: CaputoKernel, U0, U, t):
    """``W_hat(t)`` for nodal values ``U_1..U_N`` and initial state ``U0``."""
    U0, Ua = _as_states(U0, U, kernel.N)
    V = discrete_caputo(kernel, U0, Ua)
    full = np.vstack([U0, Ua])
    out = interpolate_from_derivative(kernel.partition, kernel.alpha, full, V, t)
    return out[0] if np.ndim(t) == 0 else out


@dataclass
class KernelReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        return "ok" if self.ok else "\n".join(self.violations)


def check_kernel_properties(kernel: CaputoKernel, limit: int = 50) -> KernelReport:
    """Report every violated sign or monotonicity relation of ``K`` and its inverse."""
    kernel.require_inverse()
    K, Ki, c0 = kernel.K, kernel.Kinv, kernel.Kinv_col0
    N = kernel.N
    rep = KernelReport()

    def add(name, idx):
        for ij in idx[:limit]:
            rep.violations.append(f"{name} at {tuple(int(x) + 1 for x in np.atleast_1d(ij))}")

    low = np.tril_indices(N)
    bad = K[low] <= 0
    add("K[n,i] > 0", np.column_stack(low)[bad])
    add("Kinv[i,i] > 0", np.flatnonzero(np.diag(Ki) <= 0))
    sub = np.tril_indices(N, -1)
    bad = Ki[sub] >= 0
    add("Kinv[n,i] < 0 (i < n)", np.column_stack(sub)[bad])
    add("Kinv[n,0] < 0", np.flatnonzero(c0 >= 0))
    add("Kinv[n,0] < Kinv[n+1,0]", np.flatnonzero(np.diff(c0) <= 0))
    # Kinv[n, i] < Kinv[n+1, i] for 1 <= i < n < N
    if N > 2:
        n_idx, i_idx = np.tril_indices(N - 1, -1)
        bad = Ki[n_idx + 1, i_idx] <= Ki[n_idx, i_idx]
        add("Kinv[n,i] < Kinv[n+1,i]", np.column_stack([n_idx, i_idx])[bad])
    resid = np.abs(K @ Ki - np.eye(N)).max(axis=1) if N else np.zeros(0)
    add("K Kinv = I", np.flatnonzero(resid > 1e-10))
    return rep
