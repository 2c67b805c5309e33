import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erfcx

from fracflow import errors
from fracflow.partition import make_partition, random_partition, uniform_partition
from fracflow.special import (
    MittagLefflerParams,
    frac_integral_pc,
    gamma_fn,
    lp_alpha_norm,
    lp_norm_pc,
    mittag_leffler,
    sample_times,
)

from oracles import mp_mittag_leffler


def test_gamma_values():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(2.0) == 1.0
    assert gamma_fn(1.5) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    for x in np.linspace(0.05, 3, 37):
        assert gamma_fn(x) == pytest.approx(float(mp.gamma(x)), rel=1e-13)
    for bad in (0.0, -1.0, 172.0):
        with pytest.raises(errors.OutOfRange):
            gamma_fn(bad)


def test_mittag_leffler_special_cases():
    assert mittag_leffler(0.37, 0.0) == 1.0
    assert mittag_leffler(1.0, -1.0) == pytest.approx(0.3678794412, abs=1e-10)
    assert mittag_leffler(0.5, -1.0) == pytest.approx(math.e * math.erfc(1.0), abs=1e-12)


def test_half_order_against_erfcx_on_whole_range():
    x = np.linspace(0, 50, 501)
    np.testing.assert_allclose(mittag_leffler(0.5, -x), erfcx(x), rtol=0, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
@pytest.mark.parametrize("z", [-12.0, -7.0, -5.5, -5.0, -2.0, -0.3, 0.4, 1.0, 2.0])
def test_against_extended_precision_series(alpha, z):
    if z > 0 and z ** (1 / alpha) > 700:
        pytest.skip("result overflows a double")
    if abs(z) ** (1 / alpha) > 2500:
        pytest.skip("oracle precision too expensive")
    assert mittag_leffler(alpha, z) == pytest.approx(mp_mittag_leffler(alpha, z), abs=1e-10, rel=1e-12)


def test_crossover_is_seamless():
    # the series/integral switch sits at |z| = cutoff or |z|^(1/alpha) = cutoff
    for alpha in (0.3, 0.8):
        cut = MittagLefflerParams().series_cutoff
        z0 = -min(cut, cut**alpha)
        left, right = mittag_leffler(alpha, [z0 * (1 + 1e-9), z0 * (1 - 1e-9)])
        assert abs(left - right) < 1e-9


def test_mittag_leffler_errors():
    with pytest.raises(errors.Unsupported):
        mittag_leffler(0.5, -50.5)
    with pytest.raises(errors.Unsupported):
        mittag_leffler(0.1, 2.0)  # about exp(1024)
    with pytest.raises(errors.BadOrder):
        mittag_leffler(1.2, -1.0)
    with pytest.raises(errors.BadOrder):
        mittag_leffler(0.0, -1.0)


def test_mittag_leffler_vectorised():
    z = np.array([-3.0, -0.5, 0.0, 0.5])
    np.testing.assert_array_equal(mittag_leffler(0.6, z), [mittag_leffler(0.6, v) for v in z])


@given(st.floats(0.05, 1.0), st.floats(-50, 0))
def test_completely_monotone_on_negative_axis(alpha, z):
    v = mittag_leffler(alpha, z)
    assert 0.0 <= v <= 1.0 + 1e-15
    assert mittag_leffler(alpha, z - 0.1) <= v + 1e-12 if z - 0.1 >= -50 else True


def test_frac_integral_examples():
    P = make_partition([0, 1, 2])
    assert frac_integral_pc(P, 0.5, [1, 2], 2.0) == pytest.approx(4.8284271, abs=1e-7)
    assert frac_integral_pc(P, 0.5, [0, 0], 1.3) == 0.0
    Q = random_partition(np.random.default_rng(0), 9)
    ts = np.linspace(0, 1, 11)
    np.testing.assert_allclose(frac_integral_pc(Q, 0.3, np.ones(9), ts), ts**0.3 / 0.3, rtol=1e-13)
    with pytest.raises(errors.OutOfRange):
        frac_integral_pc(Q, 0.3, np.ones(9), 1.5)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.sampled_from([0.2, 0.5, 0.8]), st.floats(0.01, 1.0))
def test_frac_integral_against_quadrature(seed, N, alpha, frac):
    rng = np.random.default_rng(seed)
    P = random_partition(rng, N)
    g = rng.normal(size=N)
    t = frac * P.T
    # algebraic-weight quadrature (QAWS) absorbs the endpoint singularity at s = t
    pieces = []
    for k in range(N):
        a, b = P.nodes[k], min(P.nodes[k + 1], t)
        if a >= t:
            break
        if b == t:
            val, _ = integrate.quad(lambda s: 1.0, a, b, weight="alg", wvar=(0.0, alpha - 1.0), epsabs=1e-14)
        else:
            val, _ = integrate.quad(lambda s: (t - s) ** (alpha - 1.0), a, b, epsabs=1e-14, epsrel=1e-13)
        pieces.append(g[k] * val)
    assert frac_integral_pc(P, alpha, g, t) == pytest.approx(float(sum(pieces)), rel=1e-9, abs=1e-11)


def test_lp_alpha_norm_examples():
    P = uniform_partition(2.0, 5)
    c, p, a = 3.0, 2.0, 0.4
    assert lp_alpha_norm(P, a, p, np.full(5, c)) == pytest.approx((c**p * 2.0**a / a) ** (1 / p), rel=1e-13)
    assert lp_alpha_norm(P, a, p, np.zeros(5)) == 0.0
    with pytest.raises(errors.BadExponent):
        lp_alpha_norm(P, a, 0.5, np.ones(5))


def test_lp_alpha_norm_interior_sup():
    P = make_partition([0, 1, 2])
    g = np.array([0.0, 1.0])
    ts = np.linspace(0, 2, 10_001)
    brute = np.sqrt(frac_integral_pc(P, 0.5, g**2, ts).max())
    assert abs(lp_alpha_norm(P, 0.5, 2, g, m=64) - brute) < 1e-3
    assert lp_alpha_norm(P, 0.5, 2, g, m=1) <= lp_alpha_norm(P, 0.5, 2, g, m=64)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.sampled_from([0.3, 0.6]), st.integers(1, 6), st.integers(2, 3))
def test_lp_alpha_norm_monotone_under_nested_sampling(seed, N, alpha, m, factor):
    rng = np.random.default_rng(seed)
    P = random_partition(rng, N)
    g = rng.normal(size=(N, 2))
    coarse = lp_alpha_norm(P, alpha, 1.5, g, m=m)
    fine = lp_alpha_norm(P, alpha, 1.5, g, m=m * factor)
    assert fine >= coarse * (1 - 1e-13)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.sampled_from([0.3, 0.6]), st.sampled_from([1.0, 2.0, 3.0]))
def test_embedding_into_plain_lp(seed, N, alpha, p):
    rng = np.random.default_rng(seed)
    P = random_partition(rng, N, T=float(rng.uniform(0.5, 3)))
    g = rng.normal(size=N)
    lhs = lp_norm_pc(P, p, g)
    rhs = P.T ** ((1 - alpha) / p) * lp_alpha_norm(P, alpha, p, g, m=8)
    assert lhs <= rhs * (1 + 1e-12)


def test_sample_times_layout():
    P = make_partition([0, 1, 3])
    np.testing.assert_allclose(sample_times(P, 2), [0, 0.5, 1, 2, 3])
    np.testing.assert_allclose(sample_times(P, 1), P.nodes)
