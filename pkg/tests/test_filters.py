from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from itertik.filters import (FilterError, FilterSpec, filter_gain, filter_qualification_check,
                             filter_solve, filter_value, one_minus_filter)
from itertik.oracle import dense_weighted_solve
from itertik.problems import foxgood
from itertik.spectral import decompose, diagonal_operator

mpmath.mp.dps = 50


def mp_weighted(sigma, alpha, r):
    s = mpmath.mpf(sigma) ** (mpmath.mpf(r) + 1)
    return s / (s + mpmath.mpf(alpha))


def test_weighted_unit_case():
    assert filter_value(FilterSpec("weighted", 1.0, r=1.0), 1.0) == 0.5


def test_weighted_high_precision():
    ref = mp_weighted("0.5", "0.01", "0.6")
    got = filter_value(FilterSpec("weighted", 0.01, r=0.6), 0.5)
    assert abs(got - float(ref)) <= 1e-15
    assert got == pytest.approx(0.9706, abs=1e-4)


def test_siwt_one_minus_accuracy():
    # naive 1 - F is swamped by rounding here
    spec = FilterSpec("siwt", 1e-8, r=1.0, n_iter=2)
    ref = (Fraction(1, 10**8) / (1 + Fraction(1, 10**8))) ** 2
    got = one_minus_filter(spec, 1.0)
    assert abs(got - float(ref)) / float(ref) < 1e-14
    assert abs((1 - filter_value(spec, 1.0)) - float(ref)) / float(ref) > 1e-3


def test_siwt_balanced_case():
    alpha = 0.25
    spec = FilterSpec("siwt", alpha, r=1.0, n_iter=3)
    assert one_minus_filter(spec, 0.5) == pytest.approx(0.125, rel=1e-14)


def test_classical_solve_example():
    op = diagonal_operator([1.0, 0.5])
    x = filter_solve(op, FilterSpec("classical-tikhonov", 1.0), [1.0, 0.0])
    assert np.allclose(x, [0.5, 0.0])


def test_weighted_solve_matches_oracle_on_foxgood():
    prob = foxgood(64)
    op = decompose(prob.matrix, 0.0)
    spec = FilterSpec("weighted", 1e-2, r=0.6)
    ours = filter_solve(op, spec, prob.y)
    ref = dense_weighted_solve(prob.matrix, prob.y, 1e-2, 0.6)
    assert np.linalg.norm(ours - ref) / np.linalg.norm(ref) < 1e-9


def test_small_alpha_approaches_least_squares(rng):
    a = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    op = decompose(a, 0.0)
    x_ls = rng.standard_normal(6)
    y = a @ x_ls
    errs = [np.linalg.norm(filter_solve(op, FilterSpec("tikhonov", al), y) - x_ls)
            for al in np.logspace(-2, -6, 9)]
    assert np.all(np.diff(errs) < 0)
    assert errs[-1] < 1e-4 * np.linalg.norm(x_ls)


def test_sift_n1_is_fractional():
    for s, a, g in [(0.3, 0.1, 0.7), (1.0, 1e-3, 1.4), (0.01, 0.5, 0.5)]:
        f1 = filter_value(FilterSpec("sift", a, gamma=g, n_iter=1), s)
        f2 = filter_value(FilterSpec("fractional", a, gamma=g), s)
        assert f1 == f2


def test_fractional_gamma_one_is_classical():
    for s, a in [(0.3, 0.1), (1.0, 1e-3), (0.01, 0.5)]:
        assert filter_value(FilterSpec("fractional", a, gamma=1.0), s) == pytest.approx(
            filter_value(FilterSpec("classical-tikhonov", a), s), rel=1e-14)


def test_tsvd_reference():
    spec = FilterSpec("tsvd", 0.1)
    assert filter_value(spec, np.array([0.5, 0.1, 0.05])).tolist() == [1.0, 1.0, 0.0]


def test_invalid_specs():
    with pytest.raises(FilterError):
        FilterSpec("weighted", 0.0)
    with pytest.raises(FilterError):
        FilterSpec("fractional", 0.1, gamma=0.4)
    with pytest.raises(FilterError):
        FilterSpec("siwt", 0.1, n_iter=0)
    with pytest.raises(FilterError):
        FilterSpec("bogus", 0.1)
    with pytest.raises(FilterError):
        filter_value(FilterSpec("weighted", 0.1), 0.0)
    # explicit opt-in keeps the formula available
    assert 0 < filter_value(FilterSpec("fractional", 0.1, gamma=0.4,
                                       allow_nonregularizing=True), 0.5) < 1


def test_qualification_classical_nu2():
    t = filter_qualification_check(FilterSpec("tikhonov", 1.0), 2.0, np.logspace(-2, -6, 9))
    assert t.slope == pytest.approx(1.0, abs=0.05)


def test_qualification_weighted():
    t = filter_qualification_check(FilterSpec("weighted", 1.0, r=3.0), 4.0,
                                   np.logspace(-2, -6, 9))
    assert t.slope == pytest.approx(1.0, abs=0.05)


def test_qualification_saturates():
    t = filter_qualification_check(FilterSpec("tikhonov", 1.0), 4.0, np.logspace(-2, -6, 9))
    assert t.slope == pytest.approx(1.0, abs=0.05)
    assert t.predicted_slope == 1.0


# --- properties ----------------------------------------------------------------

sigmas = st.floats(1e-6, 1.0)
alphas = st.floats(1e-8, 10.0)
rs = st.floats(0.0, 4.0)
gammas = st.floats(0.5, 3.0)
ns = st.integers(1, 30)


@st.composite
def specs(draw):
    fam = draw(st.sampled_from(["classical-tikhonov", "weighted", "fractional", "siwt", "sift"]))
    return FilterSpec(fam, draw(alphas), r=draw(rs), gamma=draw(gammas), n_iter=draw(ns))


@given(specs(), sigmas)
def test_filter_in_unit_interval(spec, s):
    f = filter_value(spec, s)
    assert 0.0 <= f <= 1.0


@given(specs(), sigmas)
def test_filter_complement(spec, s):
    f, g = filter_value(spec, s), one_minus_filter(spec, s)
    if f >= 1e-8 and g >= 1e-8:
        assert f + g == pytest.approx(1.0, abs=1e-12)


@given(specs(), sigmas)
def test_complement_consistent_when_small(spec, s):
    f = filter_value(spec, s)
    if f <= 0.5:
        assert abs((1 - f) - one_minus_filter(spec, s)) <= 1e-12


@given(specs(), st.floats(0.01, 1.0))
def test_filter_to_one_as_alpha_vanishes(spec, s):
    # sigma^(r+1) >= 1e-10 on this domain, so alpha = 1e-20 is far below every mode
    assert filter_value(spec.with_alpha(1e-20), s) > 1 - 1e-6
    assert one_minus_filter(spec.with_alpha(1e-20), s) <= one_minus_filter(spec.with_alpha(1e-12), s)


@given(specs())
def test_monotone_in_sigma(spec):
    grid = np.logspace(-6, 0, 400)
    f = filter_value(spec, grid)
    assert np.all(np.diff(f) >= -1e-15)


@given(sigmas, alphas, gammas)
def test_sandwich(s, a, g):
    omf1 = one_minus_filter(FilterSpec("tikhonov", a), s)
    omfg = one_minus_filter(FilterSpec("fractional", a, gamma=g), s)
    tol = 1e-12 * max(omf1, 1e-300)
    if g <= 1:
        assert g * omf1 - tol <= omfg <= omf1 + tol
    else:
        assert omf1 - tol <= omfg <= g * omf1 + tol


@given(sigmas, alphas, rs, ns)
def test_siwt_bounds(s, a, r, n):
    f1 = filter_value(FilterSpec("weighted", a, r=r), s)
    fn = filter_value(FilterSpec("siwt", a, r=r, n_iter=n), s)
    assert f1 * (1 - 1e-12) <= fn <= n * f1 * (1 + 1e-12)


@given(sigmas, alphas, gammas, ns)
def test_sift_bound(s, a, g, n):
    f1 = filter_value(FilterSpec("fractional", a, gamma=g), s)
    fn = filter_value(FilterSpec("sift", a, gamma=g, n_iter=n), s)
    assert fn <= n * f1 * (1 + 1e-12)


@given(st.floats(1e-4, 1.0), st.floats(1e-6, 1.0), rs, st.integers(1, 6))
def test_siwt_against_mpmath(s, a, r, n):
    omf = (mpmath.mpf(a) / (mpmath.mpf(s) ** (mpmath.mpf(r) + 1) + mpmath.mpf(a))) ** n
    spec = FilterSpec("siwt", a, r=r, n_iter=n)
    assert one_minus_filter(spec, s) == pytest.approx(float(omf), rel=1e-12)
    assert filter_value(spec, s) == pytest.approx(float(1 - omf), rel=1e-12, abs=1e-300)


@given(st.floats(1e-4, 1.0), st.floats(1e-6, 1.0), gammas, st.integers(1, 6))
def test_sift_against_mpmath(s, a, g, n):
    s2, a_, g_ = mpmath.mpf(s) ** 2, mpmath.mpf(a), mpmath.mpf(g)
    num = (s2 + a_) ** (g_ * n) - ((s2 + a_) ** g_ - s2 ** g_) ** n
    ref = num / (s2 + a_) ** (g_ * n)
    spec = FilterSpec("sift", a, gamma=g, n_iter=n)
    assert filter_value(spec, s) == pytest.approx(float(ref), rel=1e-11)


@given(specs(), sigmas)
def test_gain_is_filter_over_sigma(spec, s):
    assume(filter_value(spec, s) > 1e-300)
    assert filter_gain(spec, s) == pytest.approx(filter_value(spec, s) / s, rel=1e-12)
