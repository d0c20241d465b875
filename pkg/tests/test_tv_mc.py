import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kcycles.equilibrium import sample_mu_counts
from kcycles.exact_chain import tv_curve_exact
from kcycles.kcycle_walk import t_mix
from kcycles.tv_mc import (Profile, capped_small_counts, crossing_time, empirical_tv_projection,
                           fixed_point_statistic, fixed_points, isotonic_decreasing,
                           mixing_profile, threshold_tv, walk_samples)


def poisson_chi_square(x, lam):
    """Chi-square p-value of integer samples against Poisson(lam), bins pooled to expected >= 5."""
    n = len(x)
    top = int(stats.poisson.ppf(1 - 1e-9, lam)) + 1
    probs = stats.poisson.pmf(np.arange(top), lam)
    probs[-1] += stats.poisson.sf(top - 1, lam)
    obs = np.bincount(np.minimum(x, top - 1), minlength=top).astype(float)
    exp = probs * n
    o, e, acc_o, acc_e = [], [], 0.0, 0.0
    for a, b in zip(obs, exp):
        acc_o += a
        acc_e += b
        if acc_e >= 5:
            o.append(acc_o)
            e.append(acc_e)
            acc_o = acc_e = 0.0
    o[-1] += acc_o
    e[-1] += acc_e
    return stats.chisquare(o, e, ddof=0).pvalue


def test_identical_and_disjoint():
    a = np.zeros((50, 4), dtype=np.int64)
    a[:, 1] = np.arange(50) % 3
    assert empirical_tv_projection(a, a).estimate == 0
    b = a.copy()
    b[:, 1] += 10
    assert empirical_tv_projection(a, b, projection=fixed_points).estimate == 1


def test_empty_rejected():
    with pytest.raises(ValueError):
        empirical_tv_projection(np.zeros((0, 4), int), np.zeros((3, 4), int))


def test_start_state_is_far(rng):
    n = 300
    walk = walk_samples(n, 2, [0.0], 200, rng, 3)[:, 0]
    ref = sample_mu_counts(n, 2, 2000, rng, 3)
    assert empirical_tv_projection(walk, ref).estimate > 0.95
    assert fixed_point_statistic(n, 2, 0.0, 200, rng).estimate > 0.95


def test_fixed_points_before_cutoff_are_poisson():
    """Untouched points number ~Poisson(e^c); the mixed remainder adds ~Poisson(1) more."""
    n, k, c = 2000, 2, 2.0
    t = n / k * (math.log(n) - c)
    n1 = walk_samples(n, k, [t], 1000, np.random.default_rng(11), 1)[:, 0, 1]
    assert poisson_chi_square(n1, math.exp(c) + 1) > 0.01


def test_far_past_cutoff_is_small():
    n, k = 1000, 2
    est = fixed_point_statistic(n, k, t_mix(n, k) + 5 * n, 400, np.random.default_rng(12))
    assert est.raw <= 0.05 + 2 * est.stderr


def test_fixed_point_statistic_needs_reps():
    with pytest.raises(ValueError):
        fixed_point_statistic(50, 2, 1.0, 50, 0)


def test_same_law_gives_zero_within_noise():
    rng = np.random.default_rng(13)
    a = sample_mu_counts(500, 2, 3000, rng, 3)
    b = sample_mu_counts(500, 2, 3000, rng, 3)
    pr = empirical_tv_projection(a, b, debias=True, rng=rng)
    assert pr.estimate <= 3 * pr.stderr
    th = threshold_tv(a[:, 1], b[:, 1])
    assert th.raw <= 3 * th.stderr + 1e-12


def test_coarser_projection_not_larger():
    rng = np.random.default_rng(14)
    n = 400
    walk = walk_samples(n, 2, [0.8 * t_mix(n, 2)], 1000, rng, 3)[:, 0]
    ref = sample_mu_counts(n, 2, 3000, rng, 3)
    fine = empirical_tv_projection(walk, ref)
    coarse = empirical_tv_projection(walk, ref, projection=lambda c: capped_small_counts(c, 2, (1,)))
    assert coarse.raw <= fine.raw + 3 * max(fine.stderr, coarse.stderr)


def test_profile_decreases_through_cutoff():
    n = 1000
    for k in (2, 3):
        tm = t_mix(n, k)
        grid = [max(0.0, tm - 3 * n), tm, 2 * tm]
        prof = mixing_profile(n, k, grid, 200, np.random.default_rng(15 + k), ref_reps=5000)
        lower = prof.lower()
        assert lower[0] >= 0.9
        assert lower[-1] <= 0.1
        best, _ = prof.best()
        assert np.max(np.abs(isotonic_decreasing(best) - best)) < 0.1


def test_grid_outside_range_rejected():
    with pytest.raises(ValueError):
        mixing_profile(50, 2, [0.0, 3 * t_mix(50, 2)], 10, 0)


@pytest.mark.parametrize("k", [2, 3])
def test_estimates_lower_bound_exact_distance(k):
    n = 10
    grid = np.linspace(0, 2 * t_mix(n, k), 8)
    prof = mixing_profile(n, k, grid, 2000, np.random.default_rng(16), ref_reps=20000)
    exact = np.array([d for _, d in tv_curve_exact(n, k, grid)])
    # 1 / ref_reps: the reference histogram cannot resolve mu-masses below that
    slack = 1 / 20000
    assert np.all(prof.estimate <= exact + 3 * prof.stderr + slack)
    assert np.all(prof.proj_estimate <= exact + 3 * prof.proj_stderr + slack)


def test_step_profile_crossing():
    times = np.arange(10.0)
    vals = np.where(times < 4.5, 1.0, 0.0)
    zero = np.zeros(10)
    prof = Profile(10, 2, times, 100, vals, zero, vals, zero)
    cr = crossing_time(prof, 0.5)
    assert cr.in_range and cr.t_hat == pytest.approx(4.5)
    flat = Profile(10, 2, times, 100, np.ones(10), zero, np.ones(10), zero)
    assert not crossing_time(flat).in_range


def test_profile_csv(tmp_path):
    z = np.zeros(2)
    prof = Profile(10, 2, np.array([0.0, 1.0]), 100, np.array([1.0, 0.2]), z + 0.01,
                   np.array([0.9, 0.1]), z + 0.02, seed=7)
    path = tmp_path / "p.csv"
    prof.to_csv(path, "cfg")
    lines = path.read_text().splitlines()
    assert lines[1] == "n,k,t,estimator,estimate,stderr,reps,seed"
    assert len(lines) == 6


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=5, max_size=80),
       st.lists(st.integers(0, 6), min_size=5, max_size=80))
def test_threshold_never_exceeds_full_histogram_tv(x, y):
    x, y = np.array(x), np.array(y)
    th = threshold_tv(x, y).raw
    full = empirical_tv_projection(x[:, None], y[:, None], projection=lambda c: c).raw
    assert 0 <= th <= full + 1e-12 <= 1 + 1e-12
