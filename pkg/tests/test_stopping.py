import numpy as np
import pytest
from hypothesis import given, strategies as st

from itertik.stopping import (NoiseModel, StopRule, StoppingError, add_noise, discrepancy_stop,
                              rate_fit, relative_error)


def test_zero_noise():
    y = np.array([1.0, 2.0, 3.0])
    yd, d = add_noise(y, NoiseModel(0.0, seed=7))
    assert d == 0.0 and np.array_equal(yd, y)


def test_noise_level_exact():
    y = np.linspace(1, 2, 50)
    yd, d = add_noise(y, NoiseModel(0.02, seed=3))
    assert np.linalg.norm(yd - y) / np.linalg.norm(y) == pytest.approx(0.02, rel=1e-14)
    assert d == pytest.approx(0.02 * np.linalg.norm(y), rel=1e-14)


def test_seeds_differ_norms_agree():
    y = np.ones(40)
    y1, d1 = add_noise(y, NoiseModel(0.05, seed=1))
    y2, d2 = add_noise(y, NoiseModel(0.05, seed=2))
    assert not np.allclose(y1, y2)
    assert d1 == pytest.approx(d2, rel=1e-14)


def test_noise_frozen_stream():
    # PCG64 + ziggurat stream, first draws for seed 0
    e = NoiseModel(1.0, seed=0).sample(3)
    ref = np.random.Generator(np.random.PCG64(0)).standard_normal(3)
    assert np.array_equal(e, ref)


def test_zero_data_rejected():
    with pytest.raises(StoppingError):
        add_noise(np.zeros(4), NoiseModel(0.1))


def test_discrepancy_examples():
    rule = StopRule.discrepancy(0.1, 1.01)
    assert discrepancy_stop(1.01 * 0.1, rule)
    assert not discrepancy_stop(0.102, rule)
    zero = StopRule.discrepancy(0.0)
    assert discrepancy_stop(0.0, zero) and not discrepancy_stop(1e-300, zero)
    with pytest.raises(StoppingError):
        discrepancy_stop(0.1, StopRule.max_only())


def test_stop_rule_validation():
    with pytest.raises(StoppingError):
        StopRule.discrepancy(0.1, tau=1.0)
    with pytest.raises(StoppingError):
        StopRule("sometimes")


def test_relative_error_examples():
    x = np.array([1.0, -2.0, 0.5])
    assert relative_error(x, x) == 0.0
    assert relative_error(np.zeros(3), x) == 1.0
    assert relative_error(1.1 * x, x) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(StoppingError):
        relative_error(x, np.zeros(3))


def test_rate_fit_examples():
    d = np.logspace(-2, -6, 8)
    assert rate_fit(np.column_stack([d, d])).slope == pytest.approx(1.0, abs=1e-12)
    fit = rate_fit(np.column_stack([d, 3.0 * d ** (2 / 3)]))
    assert fit.slope == pytest.approx(2 / 3, abs=1e-6)
    assert fit.r_squared == pytest.approx(1.0)


def test_rate_fit_validation():
    d = np.logspace(-2, -6, 5)
    with pytest.raises(StoppingError):
        rate_fit(np.column_stack([d[:3], d[:3]]))
    with pytest.raises(StoppingError):
        rate_fit(np.column_stack([d[::-1], d]))
    with pytest.raises(StoppingError):
        rate_fit(np.column_stack([d, -d]))


@given(st.integers(0, 2**63), st.integers(1, 200), st.floats(1e-4, 1.0))
def test_noise_reproducible(seed, n, xi):
    y = np.linspace(-1, 3, n) + 0.1
    a = add_noise(y, NoiseModel(xi, seed))
    b = add_noise(y, NoiseModel(xi, seed))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


@given(st.floats(-3, 3), st.floats(-5, 5), st.integers(4, 20))
def test_rate_fit_recovers_slope(slope, c, n):
    d = np.logspace(-1, -7, n)
    fit = rate_fit(np.column_stack([d, np.exp(c) * d**slope]))
    assert fit.slope == pytest.approx(slope, abs=1e-6)
    assert fit.intercept == pytest.approx(c, abs=1e-5)
