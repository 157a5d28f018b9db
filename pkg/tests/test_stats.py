"""Tests for the collision statistics toolkit.

Expected means come from the exact bin-occupancy closed form: with q = 1-1/M,
the expected number of images hit at least twice by R uniform draws is
M (1 - q^R - (R/M) q^(R-1)).  Everything empirical runs under fixed seeds.
"""

import math

import numpy as np
import pytest

from chainwalk.errors import ParameterError
from chainwalk.oracle import FunctionTable, Params
from chainwalk.stats import (
    IntervalPlan,
    binomial_poisson_tv,
    calibrate_constant,
    drift_check,
    interval_hit_probability,
    multicollision_count,
    multicollision_size_bound,
    poisson_fit,
    resolve_threads,
    round_count,
    sample_collision_counts,
    variance_check,
    verify_stats_report,
)


def exact_mean(big_r, bins):
    q = 1.0 - 1.0 / bins
    return bins * (1.0 - q**big_r - (big_r / bins) * q ** (big_r - 1))


def exact_c(big_r, bins):
    return exact_mean(big_r, bins) * bins / (big_r * big_r)


def test_round_count_half_up():
    assert round_count(0.5) == 1
    assert round_count(1.5) == 2
    assert round_count(2.5) == 3
    assert round_count(-0.5) == 0
    assert round_count(1.49) == 1
    assert round_count(2.0) == 2


def test_resolve_threads_env(monkeypatch):
    monkeypatch.setenv("CWL_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(7) == 7
    monkeypatch.delenv("CWL_THREADS")
    assert resolve_threads(None) >= 1


def test_sample_counts_deterministic_and_thread_invariant():
    a = sample_collision_counts(16, 256, 30000, np.random.default_rng(5), threads=1)
    b = sample_collision_counts(16, 256, 30000, np.random.default_rng(5), threads=4)
    c = sample_collision_counts(16, 256, 30000, np.random.default_rng(5), threads=1)
    assert np.array_equal(a, b)
    assert np.array_equal(a, c)
    assert len(a) == 30000
    with pytest.raises(ParameterError):
        sample_collision_counts(0, 256, 10, np.random.default_rng(0))


def test_sample_counts_mean_matches_closed_form():
    for big_r, bins in [(16, 256), (32, 1024), (32, 4096)]:
        values = sample_collision_counts(
            big_r, bins, 100_000, np.random.default_rng([11, big_r, bins])
        )
        mean = values.mean()
        sigma = values.std(ddof=1) / math.sqrt(len(values))
        assert abs(mean - exact_mean(big_r, bins)) < 4.0 * sigma


def test_exact_mean_reference_values():
    assert exact_mean(16, 256) == pytest.approx(0.45198156576702964, rel=1e-12)
    assert exact_mean(32, 1024) == pytest.approx(0.4750142932658292, rel=1e-12)
    assert exact_mean(32, 4096) == pytest.approx(0.12050403892686035, rel=1e-12)


def test_multicollision_count_ground_truth():
    fn = FunctionTable(Params(n=3, m=3, k=1), [0, 0, 1, 1, 2, 2, 3, 4])
    assert multicollision_count(fn, [0, 1, 2, 3]) == 2
    assert multicollision_count(fn, [0, 2, 4, 6]) == 0
    assert multicollision_count(fn, range(8)) == 3


def test_calibrate_constant():
    cal = calibrate_constant(16, 256, 200_000, np.random.default_rng(1))
    assert 0.45 <= cal.c <= 0.72
    assert cal.ci_low <= exact_c(16, 256) <= cal.ci_high
    assert cal.ci_low < cal.c < cal.ci_high
    with pytest.raises(ParameterError):
        calibrate_constant(32, 256, 100, np.random.default_rng(0))


def test_constant_approaches_half_from_below():
    # finite-R limit at lambda -> 0 is (R-1)/(2R), not 1/2
    assert abs(exact_c(64, 1 << 16) - 63.0 / 128.0) < 1e-3
    values = [exact_c(big_r, 1 << 16) for big_r in (8, 16, 32, 64, 128)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert all(v < 0.5 for v in values)


def test_interval_plan_build_and_refresh():
    plan = IntervalPlan.build(8, 128, 4.0)
    assert plan.expected == 2
    assert plan.width == 1
    assert plan.expected_now == 2
    moved = plan.refreshed(7, 120)
    assert moved.width == 1
    assert moved.expected == 2
    assert moved.expected_now == round_count(4.0 * 49 / 120)
    with pytest.raises(ParameterError):
        IntervalPlan.build(32, 256, 1.0)


def test_interval_hit_probability():
    c = exact_c(32, 1024)
    up = interval_hit_probability(32, 1024, c, "upper", 10_000, np.random.default_rng(2))
    low = interval_hit_probability(32, 1024, c, "lower", 10_000, np.random.default_rng(2))
    assert up.probability >= 0.05
    assert low.probability >= 0.05
    # E = round(c R^2 / M) = 0 here, below the working window
    assert up.expected == 0 and up.sparse_regime
    c_big = exact_c(64, 1024)
    rich = interval_hit_probability(64, 1024, c_big, "upper", 10_000, np.random.default_rng(2))
    assert rich.expected == 2 and not rich.sparse_regime
    assert rich.probability >= 0.05
    degenerate = interval_hit_probability(
        2, 1 << 16, 0.5, "upper", 1000, np.random.default_rng(3)
    )
    assert degenerate.sparse_regime
    with pytest.raises(ParameterError):
        interval_hit_probability(32, 1024, c, "sideways", 10, np.random.default_rng(0))


def test_wide_window_capture():
    # window of ten sigmas around the mean captures at least 0.9 of the mass
    values = sample_collision_counts(32, 1024, 20_000, np.random.default_rng(6))
    center = values.mean()
    half = 10.0 * values.std(ddof=1)
    inside = np.mean(np.abs(values - center) <= half)
    assert inside >= 0.9


def test_variance_check():
    rep = variance_check(16, 256, 50_000, np.random.default_rng(4))
    assert rep.var_ok
    assert rep.sigma_ok
    assert rep.var_z <= rep.mean_z * rep.margin


def test_multicollision_size_bound():
    assert multicollision_size_bound(4, 8, 3) == pytest.approx(560.0 / 65536.0, rel=1e-12)
    # decreasing in ell at fixed (n, m) once past the peak of the count term
    assert multicollision_size_bound(4, 8, 4) < multicollision_size_bound(4, 8, 3)
    # decreasing in m
    assert multicollision_size_bound(4, 9, 3) < multicollision_size_bound(4, 8, 3)
    # astronomically large pair counts overflow to inf and say so
    assert multicollision_size_bound(1002, 1002, 2) == math.inf
    # stable for domains far beyond float spacing: exact birthday value
    assert multicollision_size_bound(64, 64, 2) == pytest.approx(2.0**63, rel=1e-9)
    assert multicollision_size_bound(60, 120, 2) == pytest.approx(
        math.comb(1 << 60, 2) * 2.0**-120, rel=1e-9
    )
    with pytest.raises(ParameterError):
        multicollision_size_bound(4, 8, 1)
    with pytest.raises(ParameterError):
        multicollision_size_bound(4, 8, 17)
    with pytest.raises(ParameterError):
        multicollision_size_bound(0, 8, 2)


def test_drift_check():
    tight = drift_check(64, 1 << 14)
    assert tight.ok
    assert tight.precondition_ok
    assert tight.width == 1
    loose = drift_check(64, 512)
    assert not loose.precondition_ok
    assert loose.ok
    assert loose.width == 3
    with pytest.raises(ParameterError):
        drift_check(0, 512)


def test_poisson_fit_across_seeds():
    p_values = []
    for seed in range(40):
        rep = poisson_fit(32, 1024, 4000, np.random.default_rng([7, seed]))
        assert rep.dof >= 1
        assert sum(rep.histogram) == 4000 * 1024
        p_values.append(rep.p_value)
    good = sum(1 for p in p_values if p > 0.001)
    assert good >= 38


def test_binomial_poisson_distance():
    lam = 1.0 / 256.0
    for big_r in (1, 4, 16, 64):
        assert binomial_poisson_tv(big_r, big_r * 256) < 0.01
    assert binomial_poisson_tv(1, 256) < lam * lam
    values = [binomial_poisson_tv(big_r, big_r * 256) for big_r in (1, 4, 16, 64)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_verify_stats_report_shape_and_determinism():
    row = verify_stats_report(16, 256, 20_000, np.random.default_rng(12))
    again = verify_stats_report(16, 256, 20_000, np.random.default_rng(12))
    assert row == again
    assert set(row) == {
        "R", "M", "samples", "mean_Z", "var_Z", "c_hat", "p_upper", "p_lower",
    }
    assert row["R"] == 16 and row["M"] == 256 and row["samples"] == 20_000
    assert 0.0 <= row["p_upper"] <= 1.0
    assert 0.0 <= row["p_lower"] <= 1.0
