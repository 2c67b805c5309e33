"""Convex energies, their resolvents, and Lipschitz perturbations.

Every energy maps a state ``w`` (a 1-D array of length ``d``) to an
extended real value and knows how to solve the resolvent inclusion

    c * w + dPhi(w) + Psi(w)  contains  r,    c > 0,

which is the work done at every step of the time stepper.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg

from .errors import IllPosed, NoConvergence, NotDifferentiable
from .partition import Partition

_EPS = np.finfo(float).eps
_TINY = sys.float_info.min


@dataclass(frozen=True)
class ProxConfig:
    tol: float | None = None  # defaults: 1e-14 scalar, 1e-12 vector
    max_iter: int = 100
    init_floor: float = 1e-300

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")

    def tol_for(self, d: int) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-14 if d == 1 else 1e-12


def _vec(w) -> np.ndarray:
    return np.atleast_1d(np.asarray(w, dtype=float))


def solve_increasing(h, dh, lo: float, hi: float | None, x0: float, tol: float, max_iter: int) -> float:
    """Root of a strictly increasing scalar function by safeguarded Newton.

    ``lo`` is a point with ``h(lo) < 0`` (or ``-inf`` for an unbounded
    domain); ``hi`` likewise with ``h(hi) > 0`` or ``None``, in which case the
    bracket is grown from ``x0``. Newton iterates leaving the bracket are
    replaced by bisection, geometric when the bracket spans many decades.
    Stops once ``|h(x)| <= tol``.
    """
    for _ in range(200):
        if hi is not None and h(hi) > 0:
            break
        base = hi if hi is not None else x0
        hi = base + max(1.0, abs(base))
        if hi is not None and h(hi) > 0:
            break
    else:
        raise NoConvergence("could not bracket the resolvent root from above")
    if lo == -math.inf:
        lo = min(x0, hi) - max(1.0, abs(hi))
        for _ in range(200):
            if h(lo) < 0:
                break
            lo -= max(1.0, abs(lo))
        else:
            raise NoConvergence("could not bracket the resolvent root from below")
    hlo = h(lo)
    if hlo >= 0:
        return lo
    x = min(max(x0, lo), hi)
    if not (lo < x < hi):
        x = 0.5 * (lo + hi)
    def geometric(a, b):
        # bracket spans many decades above a nonnegative floor
        return a >= 0 and b > 1e3 * max(a, _TINY)

    def width(a, b):
        return math.log(b) - math.log(max(a, _TINY)) if geometric(a, b) else b - a

    sizes = [math.inf, math.inf]
    for _ in range(max_iter):
        hx = h(x)
        if abs(hx) <= tol:
            return x
        if hx < 0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4 * _EPS * max(abs(lo), abs(hi)) or (lo >= 0 and hi <= _TINY):
            return x
        size = width(lo, hi)
        slow = size > 0.5 * sizes[0]
        sizes = [sizes[1], size]
        d = dh(x)
        xn = x - hx / d if d > 0 and math.isfinite(d) else math.nan
        if slow or not (lo < xn < hi):
            # Newton creeping along a steep boundary layer: bisect instead
            xn = math.sqrt(max(lo, _TINY)) * math.sqrt(hi) if geometric(lo, hi) else 0.5 * (lo + hi)
            sizes = [math.inf, math.inf]
        x = xn
    hx = h(x)
    if abs(hx) <= tol:
        return x
    raise NoConvergence(f"resolvent Newton did not converge in {max_iter} iterations (|h|={abs(hx):.3e})")


class Energy:
    """Base class; subclasses override ``value``, ``grad`` and ``_prox``."""

    differentiable = True
    lower_bound = -math.inf  # componentwise domain floor, for scalar solves

    def value(self, w) -> float:
        raise NotImplementedError

    def grad(self, w) -> np.ndarray:
        raise NotDifferentiable(f"{type(self).__name__} has no gradient")

    def in_domain(self, w) -> bool:
        return math.isfinite(self.value(w))

    def values(self, W) -> np.ndarray:
        """``Phi`` applied to each row of ``W`` (shape ``(k, d)``)."""
        return np.array([self.value(w) for w in np.atleast_2d(W)])

    def _prox(self, c: float, r: np.ndarray, cfg: ProxConfig) -> np.ndarray:
        raise NotImplementedError

    # scalar hooks used when a perturbation is folded into one Newton solve
    def _d1(self, x: float) -> float:
        return float(self.grad(np.array([x]))[0])

    def _d2(self, x: float) -> float:
        h = 1e-7 * max(1.0, abs(x))
        return (self._d1(x + h) - self._d1(x - h)) / (2 * h)

    def _scalar_ok(self) -> bool:
        return self.differentiable


@dataclass(frozen=True)
class Quadratic(Energy):
    """``lam/2 |w|^2``."""

    lam: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    def value(self, w):
        w = _vec(w)
        return 0.5 * self.lam * float(w @ w)

    def values(self, W):
        W = np.atleast_2d(W)
        return 0.5 * self.lam * np.einsum("ij,ij->i", W, W)

    def grad(self, w):
        return self.lam * _vec(w)

    def _prox(self, c, r, cfg):
        return r / (c + self.lam)

    def _d1(self, x):
        return self.lam * x

    def _d2(self, x):
        return self.lam


@dataclass(frozen=True, eq=False)
class QuadraticForm(Energy):
    """``w.A w / 2`` for a symmetric positive semidefinite matrix ``A``."""

    A: np.ndarray
    _factors: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("A must be a symmetric square matrix")
        if A.size and np.linalg.eigvalsh(A).min() < -1e-12 * max(1.0, np.abs(A).max()):
            raise ValueError("A must be positive semidefinite")
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def value(self, w):
        w = _vec(w)
        return 0.5 * float(w @ self.A @ w)

    def values(self, W):
        W = np.atleast_2d(W)
        return 0.5 * np.einsum("ij,ij->i", W @ self.A, W)

    def grad(self, w):
        return self.A @ _vec(w)

    def seminorm(self, w) -> float:
        w = _vec(w)
        return math.sqrt(max(float(w @ self.A @ w), 0.0))

    def _prox(self, c, r, cfg):
        fac = self._factors.get(c)
        if fac is None:
            fac = linalg.cho_factor(c * np.eye(self.dim) + self.A)
            if len(self._factors) > 64:
                self._factors.clear()
            self._factors[c] = fac
        return linalg.cho_solve(fac, r)


@dataclass(frozen=True)
class PowerP(Energy):
    """``lam/p |w|^p`` with the Euclidean norm, ``p > 1``."""

    lam: float = 1.0
    p: float = 1.5

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    def value(self, w):
        return self.lam / self.p * float(np.linalg.norm(_vec(w))) ** self.p

    def values(self, W):
        return self.lam / self.p * np.linalg.norm(np.atleast_2d(W), axis=1) ** self.p

    def grad(self, w):
        w = _vec(w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return np.zeros_like(w)
        return self.lam * nw ** (self.p - 2) * w

    def _d1(self, x):
        return self.lam * math.copysign(abs(x) ** (self.p - 1), x) if x else 0.0

    def _d2(self, x):
        return self.lam * (self.p - 1) * abs(x) ** (self.p - 2) if x else math.inf

    def _prox(self, c, r, cfg):
        # radial: w = s r/|r| with c s + lam s^(p-1) = |r|
        rho = float(np.linalg.norm(r))
        if rho == 0 or self.lam == 0:
            return r / c
        lam, p = self.lam, self.p
        s = solve_increasing(
            lambda s: c * s + lam * s ** (p - 1) - rho,
            lambda s: c + lam * (p - 1) * s ** (p - 2) if s > 0 else math.inf,
            lo=0.0,
            hi=rho / c,
            x0=min(rho / c, (rho / lam) ** (1 / (p - 1))),
            tol=cfg.tol_for(1) * (1 + rho),
            max_iter=cfg.max_iter,
        )
        return s / rho * r


@dataclass(frozen=True)
class Entropy(Energy):
    """``lam (w ln w - w)`` summed over components, domain ``w >= 0``."""

    lam: float = 1.0
    lower_bound = 0.0

    def value(self, w):
        w = _vec(w)
        if np.any(w < 0):
            return math.inf
        safe = np.where(w > 0, w, 1.0)
        return self.lam * float(np.sum(np.where(w > 0, w * np.log(safe), 0.0) - w))

    def values(self, W):
        W = np.atleast_2d(W)
        safe = np.where(W > 0, W, 1.0)
        out = self.lam * np.sum(np.where(W > 0, W * np.log(safe), 0.0) - W, axis=1)
        return np.where(np.any(W < 0, axis=1), math.inf, out)

    def grad(self, w):
        w = _vec(w)
        if np.any(w <= 0):
            raise NotDifferentiable("entropy is not differentiable at w <= 0")
        return self.lam * np.log(w)

    def _d1(self, x):
        return self.lam * math.log(x)

    def _d2(self, x):
        return self.lam / x

    def _prox(self, c, r, cfg):
        lam = self.lam
        if lam == 0:
            return np.maximum(r / c, 0.0)
        out = np.empty_like(r)
        for k, rk in enumerate(r):
            hi = max(rk / c, 0.0) + 1.0
            out[k] = solve_increasing(
                lambda x: c * x + lam * math.log(x) - rk,
                lambda x: c + lam / x,
                lo=cfg.init_floor,
                hi=hi,
                x0=cfg.init_floor,
                tol=cfg.tol_for(1) * (1 + abs(rk)),
                max_iter=cfg.max_iter,
            )
        return out


def _circle_d1(lam, x):
    if x >= 1.0:
        return 0.0
    return -lam * (1.0 - x) / math.sqrt(x * (2.0 - x))


@dataclass(frozen=True)
class Circle(Energy):
    """``-lam sqrt(1 - (1 - w)_+^2)`` summed over components, domain ``w >= 0``."""

    lam: float = 1.0
    lower_bound = 0.0

    def value(self, w):
        w = _vec(w)
        if np.any(w < 0):
            return math.inf
        x = np.minimum(w, 1.0)
        return -self.lam * float(np.sum(np.sqrt(x * (2.0 - x))))

    def values(self, W):
        W = np.atleast_2d(W)
        x = np.clip(W, 0.0, 1.0)
        out = -self.lam * np.sum(np.sqrt(x * (2.0 - x)), axis=1)
        return np.where(np.any(W < 0, axis=1), math.inf, out)

    def grad(self, w):
        w = _vec(w)
        if np.any(w <= 0):
            raise NotDifferentiable("circle energy is not differentiable at w <= 0")
        return np.array([_circle_d1(self.lam, x) for x in w])

    def _d1(self, x):
        return _circle_d1(self.lam, x)

    def _d2(self, x):
        if x >= 1.0:
            return 0.0
        return self.lam * (x * (2.0 - x)) ** -1.5

    def _prox(self, c, r, cfg):
        lam = self.lam
        out = np.empty_like(r)
        for k, rk in enumerate(r):
            if rk / c >= 1.0 or lam == 0:
                out[k] = max(rk / c, 0.0) if lam == 0 else rk / c
                continue
            out[k] = solve_increasing(
                lambda x: c * x + _circle_d1(lam, x) - rk,
                self._d2_shift(c),
                lo=cfg.init_floor,
                hi=1.0,
                x0=cfg.init_floor,
                tol=cfg.tol_for(1) * (1 + abs(rk)),
                max_iter=cfg.max_iter,
            )
        return out

    def _d2_shift(self, c):
        return lambda x: c + self._d2(x)


@dataclass(frozen=True, eq=False)
class Custom(Energy):
    """User-supplied energy: ``prox_fn(c, r)`` must solve ``c w + dPhi(w) ∋ r``."""

    value_fn: Callable[[np.ndarray], float]
    prox_fn: Callable[[float, np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def differentiable(self):
        return self.grad_fn is not None

    def value(self, w):
        return float(self.value_fn(_vec(w)))

    def grad(self, w):
        if self.grad_fn is None:
            raise NotDifferentiable("custom energy supplied without a gradient")
        return _vec(self.grad_fn(_vec(w)))

    def _prox(self, c, r, cfg):
        return _vec(self.prox_fn(c, r))


def phi_value(E: Energy, w) -> float:
    return E.value(w)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Lipschitz map ``psi(t, w)`` with constant ``lipschitz``."""

    psi: Callable[[float, np.ndarray], np.ndarray]
    lipschitz: float
    time_dependent: bool = False

    def __call__(self, t, w) -> np.ndarray:
        return _vec(self.psi(t, _vec(w)))


def gauss_points(a: float, b: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of ``q``-point Gauss-Legendre on ``[a, b]``, weights summing to one."""
    x, wts = leggauss(q)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * wts


def perturbation_avg(psi: Perturbation, n: int, P: Partition, w, q: int = 2) -> np.ndarray:
    """Average of ``psi(., w)`` over the ``n``-th interval (``n`` counted from 1)."""
    a, b = P.nodes[n - 1], P.nodes[n]
    if not psi.time_dependent:
        return psi(0.5 * (a + b), w)
    ts, wts = gauss_points(a, b, q)
    return sum(wt * psi(t, w) for t, wt in zip(ts, wts))


def prox_solve(
    E: Energy,
    c: float,
    r,
    psi_avg: Callable[[np.ndarray], np.ndarray] | None = None,
    lipschitz: float = 0.0,
    cfg: ProxConfig = ProxConfig(),
) -> tuple[np.ndarray, float]:
    """Solve ``c w + dPhi(w) + psi_avg(w) ∋ r``; return ``(w, residual)``.

    The residual is ``|c w + grad Phi(w) + psi_avg(w) - r| / (1 + |r|)`` and is
    ``nan`` when the energy has no gradient at ``w``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    r = _vec(r)
    d = len(r)
    if psi_avg is not None and lipschitz >= c:
        raise IllPosed(f"Lipschitz constant {lipschitz} must be below c = {c}")
    tol = cfg.tol_for(d)
    if psi_avg is None:
        w = E._prox(c, r, cfg)
    elif d == 1 and E._scalar_ok():
        w = _scalar_perturbed(E, c, float(r[0]), psi_avg, cfg)
    else:
        w = E._prox(c, r, cfg)
        for _ in range(cfg.max_iter):
            w_new = E._prox(c, r - psi_avg(w), cfg)
            if np.linalg.norm(w_new - w) <= tol * (1 + np.linalg.norm(r)) / c:
                w = w_new
                break
            w = w_new
        else:
            raise NoConvergence("perturbed resolvent fixed point did not converge")
    return w, prox_residual(E, c, r, w, psi_avg)


def _scalar_perturbed(E, c, r, psi_avg, cfg):
    def ps(x):
        return float(psi_avg(np.array([x]))[0])

    def h(x):
        return c * x + E._d1(x) + ps(x) - r

    def dh(x):
        hstep = 1e-7 * max(1.0, abs(x))
        lo_ok = x - hstep > E.lower_bound
        dps = (ps(x + hstep) - ps(x - hstep if lo_ok else x)) / (hstep * (2 if lo_ok else 1))
        return c + E._d2(x) + dps

    x0 = float(E._prox(c, np.array([r - ps(0.0 if E.lower_bound == -math.inf else 1.0)]), cfg)[0])
    lo = cfg.init_floor if E.lower_bound == 0.0 else -math.inf
    x = solve_increasing(h, dh, lo=lo, hi=None, x0=x0, tol=cfg.tol_for(1) * (1 + abs(r)), max_iter=cfg.max_iter)
    return np.array([x])


def prox_residual(E: Energy, c: float, r, w, psi_avg=None) -> float:
    r, w = _vec(r), _vec(w)
    try:
        g = E.grad(w)
    except NotDifferentiable:
        return math.nan
    res = c * w + g - r
    if psi_avg is not None:
        res = res + psi_avg(w)
    return float(np.linalg.norm(res)) / (1.0 + float(np.linalg.norm(r)))


def prox(E: Energy, c: float, r, psi_avg=None, lipschitz: float = 0.0, cfg: ProxConfig = ProxConfig()) -> np.ndarray:
    return prox_solve(E, c, r, psi_avg, lipschitz, cfg)[0]


def sigma(E: Energy, w1, w2) -> float:
    """Coercivity modulus ``Phi(w2) - Phi(w1) - <grad Phi(w1), w2 - w1>``."""
    w1, w2 = _vec(w1), _vec(w2)
    g = E.grad(w1)
    return E.value(w2) - E.value(w1) - float(g @ (w2 - w1))


def rho(E: Energy, w1, w2) -> float:
    """Symmetrised modulus ``<grad Phi(w1) - grad Phi(w2), w1 - w2>``."""
    w1, w2 = _vec(w1), _vec(w2)
    return float((E.grad(w1) - E.grad(w2)) @ (w1 - w2))
