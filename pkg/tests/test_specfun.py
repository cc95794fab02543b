import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from risbackscatter import specfun
from risbackscatter.specfun import (ConvergenceError, erlang_cdf, erlang_max_support,
                                    erlang_pdf, gamma_p_int, gamma_q_int,
                                    integrate_adaptive, marcum_p, marcum_q,
                                    marcum_q_grid)

mpmath.mp.dps = 50


def mp_marcum_q(k, a, b):
    """Poisson-mixture series summed in 50-digit arithmetic."""
    lam = mpmath.mpf(a) ** 2 / 2
    y = mpmath.mpf(b) ** 2 / 2
    if lam == 0:
        return mpmath.gammainc(k, y, mpmath.inf, regularized=True)
    center = int(lam)
    width = int(40 + 12 * math.sqrt(float(lam)))
    terms = []
    for j in range(max(0, center - width), center + width + 1):
        w = mpmath.exp(-lam + j * mpmath.log(lam) - mpmath.loggamma(j + 1))
        terms.append(w * mpmath.gammainc(k + j, y, mpmath.inf, regularized=True))
    return mpmath.fsum(terms)


# -- incomplete gamma -----------------------------------------------------
@given(st.integers(1, 200), st.floats(0, 500, allow_nan=False))
def test_gamma_q_matches_scipy(n, x):
    assert gamma_q_int(n, x) == pytest.approx(special.gammaincc(n, x), rel=1e-12, abs=1e-300)
    assert gamma_p_int(n, x) == pytest.approx(special.gammainc(n, x), rel=1e-12, abs=1e-300)


def test_gamma_int_rejects_bad_order():
    with pytest.raises(ValueError):
        gamma_q_int(0, 1.0)
    with pytest.raises(ValueError):
        gamma_q_int(2, -1.0)


# -- Marcum Q -------------------------------------------------------------
@pytest.mark.parametrize("k,a,b", [
    (1, 0.5, 1.0), (1, 3.0, 0.5), (4, 2.0, 5.0), (30, 10.0, 8.0),
    (30, 40.0, 38.0), (30, 120.0, 100.0), (64, 3.0, 20.0), (15, 0.0, 4.0),
])
def test_marcum_q_against_high_precision(k, a, b):
    ref = mp_marcum_q(k, a, b)
    assert abs(marcum_q(k, a, b) - float(ref)) <= 1e-14
    assert abs(marcum_p(k, a, b) - float(1 - ref)) <= 1e-14


def test_marcum_q_small_tails_keep_relative_accuracy():
    # deep lower tail, where 1 - Q would cancel
    ref = float(1 - mp_marcum_q(30, 60.0, 20.0))
    assert marcum_p(30, 60.0, 20.0) == pytest.approx(ref, rel=1e-9)
    ref = float(mp_marcum_q(5, 1.0, 15.0))
    assert marcum_q(5, 1.0, 15.0) == pytest.approx(ref, rel=1e-9)


# scipy's ncx2 overflows internally for b below ~1e-6
@given(st.integers(1, 60), st.floats(0, 60), st.floats(1e-3, 60))
@settings(max_examples=200, deadline=None)
def test_marcum_q_agrees_with_scipy_ncx2(k, a, b):
    ref = stats.ncx2.sf(b * b, 2 * k, a * a) if a > 0 else stats.chi2.sf(b * b, 2 * k)
    assert marcum_q(k, a, b) == pytest.approx(ref, abs=1e-9)


@given(st.integers(1, 40), st.floats(0, 30), st.floats(0, 30))
@settings(max_examples=200, deadline=None)
def test_marcum_q_and_p_are_complementary(k, a, b):
    q, p = marcum_q(k, a, b), marcum_p(k, a, b)
    assert 0.0 <= q <= 1.0 and 0.0 <= p <= 1.0
    assert q + p == pytest.approx(1.0, abs=1e-14)


@given(st.integers(1, 40), st.floats(0, 30), st.floats(0, 30), st.floats(0.01, 5))
@settings(max_examples=150, deadline=None)
def test_marcum_q_monotone(k, a, b, step):
    assert marcum_q(k, a + step, b) >= marcum_q(k, a, b) - 1e-15
    assert marcum_q(k, a, b + step) <= marcum_q(k, a, b) + 1e-15
    assert marcum_q(k + 1, a, b) >= marcum_q(k, a, b) - 1e-15


def test_marcum_q_boundary_values():
    assert marcum_q(3, 2.0, 0.0) == 1.0
    assert marcum_q(1, 0.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert marcum_q(7, 0.0, 3.0) == pytest.approx(1 - erlang_cdf(7, 4.5), rel=1e-13)


def test_marcum_q_vectorized_and_grid():
    a = np.array([0.0, 1.0, 5.0, 20.0])
    b = np.array([0.5, 4.0, 19.0])
    grid = marcum_q_grid(6, a, b)
    assert grid.shape == (3, 4)
    for i, bb in enumerate(b):
        for j, aa in enumerate(a):
            assert grid[i, j] == pytest.approx(marcum_q(6, aa, bb), abs=1e-15)
    comp = marcum_q_grid(6, a, b, complement=True)
    np.testing.assert_allclose(comp + grid, 1.0, atol=1e-14)
    np.testing.assert_allclose(marcum_q(6, a, 4.0), grid[1], atol=1e-15)


def test_marcum_rejects_negative_arguments():
    with pytest.raises(ValueError):
        marcum_q(2, -1.0, 1.0)
    with pytest.raises(ValueError):
        marcum_q(0, 1.0, 1.0)


# -- Erlang ---------------------------------------------------------------
def test_erlang_closed_forms():
    assert erlang_cdf(1, math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert erlang_cdf(2, 1.0) == pytest.approx(1 - 2 / math.e, abs=1e-15)
    assert erlang_pdf(2, 1.0) == pytest.approx(1 / math.e, abs=1e-15)
    assert erlang_pdf(3, 0.0) == 0.0
    assert erlang_pdf(1, 0.0) == 1.0


@given(st.integers(1, 80), st.floats(0, 300))
def test_erlang_matches_gamma_distribution(k, x):
    assert erlang_cdf(k, x) == pytest.approx(stats.gamma.cdf(x, k), abs=1e-13)
    assert erlang_pdf(k, x) == pytest.approx(stats.gamma.pdf(x, k), rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("k", [1, 4, 30])
def test_erlang_pdf_integrates_to_cdf(k):
    res = integrate_adaptive(lambda x: erlang_pdf(k, x), 0.0, 2.0 * k)
    assert res.value == pytest.approx(erlang_cdf(k, 2.0 * k), rel=1e-12)


@pytest.mark.parametrize("k,n,tail", [(30, 11, 1e-16), (4, 2, 1e-9), (1, 1, 1e-12)])
def test_erlang_max_support(k, n, tail):
    x = erlang_max_support(k, n, tail)
    excess = lambda y: float(1 - (1 - mpmath.gammainc(k, y, mpmath.inf, regularized=True)) ** n)
    assert excess(x) <= tail * (1 + 1e-6)
    assert excess(x * (1 - 1e-6)) > tail * 0.999


# -- Poisson helpers ------------------------------------------------------
@pytest.mark.parametrize("lam", [0.0, 0.3, 12.0, 700.0, 7000.0])
def test_poisson_window_covers_mass(lam):
    lo, hi = specfun.poisson_window(lam)
    mass = stats.poisson.cdf(hi, lam) - (stats.poisson.cdf(lo - 1, lam) if lo > 0 else 0.0)
    assert mass >= 1 - 1e-14


# -- adaptive quadrature --------------------------------------------------
def test_integrate_smooth_functions():
    assert integrate_adaptive(np.sin, 0.0, math.pi).value == pytest.approx(2.0, rel=1e-13)
    r = integrate_adaptive(lambda x: np.exp(-x * x), -8.0, 8.0)
    assert r.value == pytest.approx(math.sqrt(math.pi), rel=1e-13)
    assert r.evaluations >= 120 and r.abs_error_estimate >= 0


def test_integrate_sharp_peak_refines():
    f = lambda x: 1e-3 / ((x - 0.3) ** 2 + 1e-6)
    exact = 1e-3 / 1e-3 * (math.atan(0.7 / 1e-3) + math.atan(0.3 / 1e-3))
    r = integrate_adaptive(f, 0.0, 1.0, rel_tol=1e-10)
    assert r.value == pytest.approx(exact, rel=1e-9)
    assert r.evaluations > 15 * 8


def test_integrate_reports_nonconvergence():
    with pytest.raises(ConvergenceError) as info:
        integrate_adaptive(lambda x: 1.0 / np.sqrt(np.abs(x - 0.5)), 0.0, 1.0,
                           rel_tol=1e-12, max_subdivisions=5)
    assert math.isfinite(info.value.result.value)
    assert info.value.result.abs_error_estimate > 0


def test_integrate_validates_arguments():
    with pytest.raises(ValueError):
        integrate_adaptive(np.sin, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate_adaptive(np.sin, 0.0, 1.0, rel_tol=0.0)
