"""Non-uniform time partitions ``0 = t_0 < t_1 < ... < t_N = T``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadCount, BadHorizon, BadOrigin, NonMonotone, OutOfRange


@dataclass(frozen=True)
class Partition:
    """Strictly increasing nodes starting at zero.

    Intervals are half-open on the left, ``(t_{n-1}, t_n]``, so every
    ``t in (0, T]`` belongs to exactly one interval ``n(t)``.
    """

    nodes: np.ndarray
    tau: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        nodes.setflags(write=False)
        tau = np.diff(nodes)
        tau.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "tau", tau)

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def tau_max(self) -> float:
        return float(self.tau.max())

    def __len__(self):
        return self.N

    def locate(self, t: float) -> tuple[int, float, float]:
        return locate(self, t)

    def interval_index(self, t) -> np.ndarray:
        """Vectorised ``n(t)`` for ``t`` in ``[0, T]``; ``n(0)`` is reported as 0."""
        return np.searchsorted(self.nodes, np.asarray(t, dtype=float), side="left")


def make_partition(nodes) -> Partition:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or len(nodes) < 2:
        raise NonMonotone("a partition needs at least two nodes")
    if nodes[0] != 0.0:
        raise BadOrigin(f"first node must be 0, got {nodes[0]!r}")
    if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0):
        raise NonMonotone("nodes must be strictly increasing")
    return Partition(nodes)


def uniform_partition(T: float, N: int) -> Partition:
    if N < 1:
        raise BadCount(f"need N >= 1, got {N}")
    if not T > 0:
        raise BadHorizon(f"need T > 0, got {T}")
    nodes = np.arange(N + 1) * (T / N)
    nodes[-1] = T
    return Partition(nodes)


def geometric_partition(T: float, N: int, ratio: float) -> Partition:
    """Steps growing by ``ratio`` from one interval to the next."""
    if N < 1:
        raise BadCount(f"need N >= 1, got {N}")
    if not T > 0:
        raise BadHorizon(f"need T > 0, got {T}")
    steps = ratio ** np.arange(N, dtype=float)
    nodes = np.concatenate([[0.0], np.cumsum(steps)])
    nodes *= T / nodes[-1]
    nodes[-1] = T
    return make_partition(nodes)


def random_partition(rng: np.random.Generator, N: int, T: float = 1.0, spread: float = 10.0) -> Partition:
    """Log-uniform random steps, rescaled to ``[0, T]``; step sizes vary by up to a factor ``spread``."""
    steps = np.exp(rng.uniform(0.0, np.log(spread), size=N))
    nodes = np.concatenate([[0.0], np.cumsum(steps)])
    nodes *= T / nodes[-1]
    nodes[-1] = T
    return make_partition(nodes)


def locate(P: Partition, t: float) -> tuple[int, float, float]:
    """Return ``(n, floor, ceil)`` with ``t`` in ``(t_{n-1}, t_n]``."""
    if not (0.0 < t <= P.T):
        raise OutOfRange(f"t={t!r} outside (0, {P.T}]")
    n = int(np.searchsorted(P.nodes, t, side="left"))
    return n, float(P.nodes[n - 1]), float(P.nodes[n])


def insert_node(P: Partition, t: float) -> Partition:
    if not (0.0 < t < P.T) or np.any(P.nodes == t):
        raise OutOfRange(f"cannot insert {t!r}")
    return make_partition(np.sort(np.append(P.nodes, t)))
