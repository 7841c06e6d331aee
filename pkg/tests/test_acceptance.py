"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line through the ``acceptance``
fixture (echoed in the terminal summary) and then asserts.
"""
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from itertik.bench.config import load_config
from itertik.bench.runner import run_rate_study, run_table
from itertik.filters import FilterSpec, filter_solve
from itertik.iterate import (ConstantExponent, ExponentialAlpha, GeometricAlpha, IterationState,
                             ParamSchedule, error_propagator, nsift_step, nsiwt_step,
                             run_iteration)
from itertik.oracle import (dense_nsift_run, dense_nsiwt_run, dense_weighted_solve,
                            max_relative_deviation)
from itertik.problems import deriv2_case3, make_problem
from itertik.spectral import decompose, diagonal_operator
from itertik.stopping import StopRule

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MAX_ONLY = StopRule.max_only(None)
TREND_CONFIGS = {
    "foxgood": "table1_foxgood_stationary.toml",
    "deriv2": "table4_deriv2_unbounded.toml",
    "blur": "table6_blur_unbounded.toml",
}
TIME_LIMIT = {"foxgood": 60.0, "deriv2": 60.0, "blur": 120.0}


def fast_run(op, sched, method, y, n):
    state, _ = run_iteration(op, replace(sched, max_iter=n), method, y, MAX_ONLY)
    return op.synthesize(state.coeffs)


@pytest.fixture(scope="module")
def trend_runs():
    out = {}
    for key, name in TREND_CONFIGS.items():
        t0 = time.perf_counter()
        res = run_table(load_config(CONFIGS / name))
        out[key] = (res, time.perf_counter() - t0)
    return out


# 1 -------------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    d2 = deriv2_case3(32)
    cases = {"random20": (rng.standard_normal((20, 20)), rng.standard_normal(20)),
             "deriv2_32": (d2.matrix, d2.y)}
    nsiwt = ParamSchedule(GeometricAlpha(0.05, 0.7), ConstantExponent(0.6))
    nsift = ParamSchedule(GeometricAlpha(0.1, 0.7), ConstantExponent(0.8))
    devs = {}
    for name, (a, y) in cases.items():
        op = decompose(a, 0.0)
        fast = filter_solve(op, FilterSpec("weighted", 0.05, r=0.7), y)
        devs[name, "weighted"] = max_relative_deviation(fast, dense_weighted_solve(a, y, 0.05, 0.7))
        devs[name, "nsiwt10"] = max_relative_deviation(fast_run(op, nsiwt, "nsiwt", y, 10),
                                                       dense_nsiwt_run(a, y, nsiwt, 10))
        devs[name, "nsift5"] = max_relative_deviation(fast_run(op, nsift, "nsift", y, 5),
                                                      dense_nsift_run(a, y, nsift, 5))
    elapsed = time.perf_counter() - t0
    worst = max(devs.values())
    ok = worst <= 1e-8 and elapsed < 5.0
    acceptance(1, ok, f"max deviation {worst:.2e} (<= 1e-8), {elapsed:.2f} s (< 5 s)")
    assert ok, devs


# 2 -------------------------------------------------------------------------------

def test_criterion_2_recurrence_equals_closed_form(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    op = deriv2_case3(32).operator_at(0.0)
    y = deriv2_case3(32).y
    worst = 0.0
    for _ in range(4):
        alpha = 10 ** rng.uniform(-3, 0)
        r = rng.uniform(0.0, 3.0)
        gamma = rng.uniform(0.5, 2.0)
        for n in (1, 2, 5, 20):
            for method, fam, kw in (("nsiwt", "siwt", {"r": r}), ("nsift", "sift", {"gamma": gamma})):
                sched = ParamSchedule.stationary(alpha, kw.get("r", kw.get("gamma")))
                rec = fast_run(op, sched, method, y, n)
                closed = filter_solve(op, FilterSpec(fam, alpha, n_iter=n, **kw), y)
                worst = max(worst, float(np.max(np.abs(rec - closed)) / np.max(np.abs(closed))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    acceptance(2, ok, f"max componentwise gap {worst:.2e} (<= 1e-12), {elapsed:.2f} s (< 1 s)")
    assert ok


# 3 -------------------------------------------------------------------------------

def classical_step(sigma, y, x, alpha):
    # iterated Tikhonov written out directly: (sigma^2 + alpha) x_n = sigma y + alpha x_{n-1}
    return (sigma * y + alpha * x) / (sigma**2 + alpha)


def test_criterion_3_degeneracy_collapse(acceptance):
    problems = {
        "foxgood": make_problem("foxgood:n=64").operator_at(0.0),
        "deriv2": make_problem("deriv2:n=64").operator_at(0.0),
        "blur": make_problem("blur:side=8").operator_at(0.0),
        "diag": diagonal_operator(np.logspace(0, -6, 64)),
    }
    rng = np.random.default_rng(3)
    alphas = GeometricAlpha(0.1, 0.7).values(30)
    worst = 0.0
    for name, op in problems.items():
        yc = op.project(op.u_basis @ rng.standard_normal(op.rank) * op.norm_scale)
        a = b = IterationState.initial(op, yc)
        ref = np.zeros(op.rank)
        for alpha in alphas:
            a = nsift_step(op, a, alpha, 1.0, yc)
            b = nsiwt_step(op, b, alpha, 1.0, yc)
            ref = classical_step(op.sigma, yc.coeffs, ref, alpha)
            scale = np.max(np.abs(ref))
            worst = max(worst, np.max(np.abs(a.coeffs - b.coeffs)) / scale,
                        np.max(np.abs(a.coeffs - ref)) / scale)
    ok = worst <= 1e-14
    acceptance(3, ok, f"max per-step gap {worst:.2e} over {len(problems)} problems (<= 1e-14)")
    assert ok


# 4 -------------------------------------------------------------------------------

RATE_CASES = [
    ("tikhonov", 4.0, 0.60, 0.74),
    ("weighted:r=3", 4.0, 0.73, 0.87),
    ("siwt:r=1,n=3", 6.0, 0.79, 0.93),
    ("sift:gamma=0.5,n=2", 4.0, 0.73, 0.87),
]


def test_criterion_4_saturation_slopes(acceptance):
    t0 = time.perf_counter()
    prob = make_problem("diag:m=801,smin=1e-8")
    deltas = np.logspace(-2, -6, 12)
    parts, ok = [], True
    for method, nu, lo, hi in RATE_CASES:
        slope = run_rate_study(prob, method, nu, deltas).fit.slope
        ok &= lo <= slope <= hi
        parts.append(f"{method} {slope:.3f} in [{lo}, {hi}]")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    acceptance(4, ok, "; ".join(parts) + f"; {elapsed:.1f} s (< 30 s)")
    assert ok


# 5 -------------------------------------------------------------------------------

def direct_product(alphas, sigma, r):
    out = 1.0
    for a in alphas:
        out *= a / (sigma ** (r + 1.0) + a)
    return out


def test_criterion_5_convergence_dichotomy(acceptance):
    r = 0.6
    good = ParamSchedule(GeometricAlpha(0.01, 0.7), ConstantExponent(r), max_iter=100)
    bad = ParamSchedule(ExponentialAlpha(1.0, 2.0), ConstantExponent(r), max_iter=100)
    ok, parts, worst_check = True, [], 0.0
    for sigma in (0.1, 0.5, 1.0):
        op = diagonal_operator([sigma])  # stored normalized; alphas rescaled to match
        first = next((n for n in range(1, 101)
                      if error_propagator(good, "nsiwt", n, sigma) < 1e-10), None)
        stay = error_propagator(bad, "nsiwt", 100, sigma)
        ok &= first is not None and stay > 0.3
        for sched, n in ((good, first or 100), (bad, 100)):
            prop = error_propagator(sched, "nsiwt", n, sigma)
            ref = direct_product(sched.alpha.values(n), sigma, r)
            worst_check = max(worst_check, abs(prop - ref) / ref)
            # noise-free run with x_true = 1: its error is the propagator (absolute, since
            # 1 - x_n cancels)
            state, _ = run_iteration(op, replace(sched, max_iter=n).in_units(
                op.norm_scale, "nsiwt", "physical"), "nsiwt", np.array([sigma]), MAX_ONLY)
            ok &= abs(abs(1.0 - state.coeffs[0]) - prop) <= 1e-15
        parts.append(f"sigma={sigma:g}: geometric < 1e-10 at n={first}, 2^k leaves {stay:.3f}")
    ok &= worst_check <= 1e-12
    acceptance(5, ok, "; ".join(parts) + f"; direct-product gap {worst_check:.1e} (<= 1e-12)")
    assert ok


# 6 -------------------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_criterion_6_perturbation_bound(acceptance, name):
    res = run_table(load_config(CONFIGS / name))
    checked = [r for r in res.records if not r.flagged]
    slack = [r.noise_free_error + r.perturbation_bound + 1e-8 - r.error for r in checked]
    bad = sum(s < 0 for s in slack)
    ok = bad == 0 and len(checked) > 0
    acceptance(6, ok, f"{name}: {bad} violations in {len(checked)} rows "
                      f"({len(res.records) - len(checked)} gamma < 1/2 rows excluded)")
    assert ok


# 7 -------------------------------------------------------------------------------

def within3(value, published):
    return published / 3 <= value <= 3 * published


def test_criterion_7a_foxgood_trend(acceptance, trend_runs):
    res, elapsed = trend_runs["foxgood"]
    recs = [r for r in res.records if not r.flagged]
    classical = [r for r in recs if "1" in (r.r, r.gamma)]
    fractional = [r for r in recs if float(r.r or r.gamma) < 1]
    best_cls = min(classical, key=lambda r: r.rel_error)
    best_low = min(fractional, key=lambda r: r.rel_error)
    sift08 = next(r for r in recs if r.method == "SIFT" and r.alpha0 == 1e-3 and r.gamma == "0.8")
    cls3 = next(r for r in recs if r.method == "SIFT" and r.alpha0 == 1e-3 and r.gamma == "1")
    trend = best_low.rel_error < best_cls.rel_error
    cells = within3(sift08.rel_error, 0.00698) and within3(cls3.rel_error, 0.01756)
    ok = trend and cells and elapsed < TIME_LIMIT["foxgood"]
    acceptance("7a", ok,
               f"best r/gamma<1 {best_low.rel_error:.5f} ({best_low.method} "
               f"alpha={best_low.alpha0:g}) vs best classical {best_cls.rel_error:.5f}; "
               f"SIFT 0.8 @1e-3 {sift08.rel_error:.5f} vs 0.00698, "
               f"classical @1e-3 {cls3.rel_error:.5f} vs 0.01756; {elapsed:.1f} s")
    assert ok


def test_criterion_7b_deriv2_trend(acceptance, trend_runs):
    res, elapsed = trend_runs["deriv2"]
    err = {r.method: r.rel_error for r in res.records}
    published = {"NSIFT": 0.054831, "NSIWT": 0.059211, "NSIT": 0.081835}
    trend = err["NSIWT"] < err["NSIT"] and err["NSIFT"] < err["NSIT"]
    cells = all(within3(err[k], v) for k, v in published.items())
    ok = trend and cells and elapsed < TIME_LIMIT["deriv2"]
    acceptance("7b", ok, ", ".join(f"{k} {err[k]:.5f} vs {v}" for k, v in published.items())
               + f"; {elapsed:.1f} s")
    assert ok


def test_criterion_7c_blur_trend(acceptance, trend_runs):
    res, elapsed = trend_runs["blur"]
    err = {r.method: r.rel_error for r in res.records}
    published = {"NSIFT": 0.19335, "NSIWT": 0.18765, "NSIT": 0.19518}
    trend = err["NSIWT"] <= 0.25 and err["NSIWT"] <= err["NSIT"]
    cells = all(within3(err[k], v) for k, v in published.items())
    ok = trend and cells and elapsed < TIME_LIMIT["blur"]
    acceptance("7c", ok, ", ".join(f"{k} {err[k]:.5f} vs {v}" for k, v in published.items())
               + f"; NSIWT <= 0.25 required; {elapsed:.1f} s")
    assert ok


# 8 -------------------------------------------------------------------------------

def test_criterion_8_determinism(acceptance, trend_runs, tmp_path):
    same = {}
    for key, name in TREND_CONFIGS.items():
        first, _ = trend_runs[key]
        a, _ = first.write(tmp_path / "a")
        b, _ = run_table(load_config(CONFIGS / name)).write(tmp_path / "b")
        same[key] = a.read_bytes() == b.read_bytes()
    ok = all(same.values())
    acceptance(8, ok, ", ".join(f"{k} {'identical' if v else 'DIFFER'}" for k, v in same.items()))
    assert ok
