import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kcycles.equilibrium import (class_weight, sample_mu_counts, sample_mu_cycle_type,
                                 sample_poisson_small, sample_uniform_cycle_type,
                                 small_cycle_statistic, small_cycle_tv_exact, z_lambda)
from kcycles.exact_chain import enumerate_partitions


def test_single_point():
    assert sample_uniform_cycle_type(1, 0)[1] == 1


def test_n_cycle_probability():
    reps = 200_000
    counts = sample_mu_counts(6, 2, reps, np.random.default_rng(1))
    p = (counts[:, 6] == 1).mean()
    assert abs(p - 1 / 6) < 4 * math.sqrt((1 / 6) * (5 / 6) / reps)


def test_mean_fixed_points_is_one():
    reps = 100_000
    for n, k in [(7, 2), (50, 3), (400, 2)]:
        n1 = sample_mu_counts(n, k, reps, np.random.default_rng(n), 1)[:, 1]
        assert abs(n1.mean() - 1) < 4 * n1.std() / math.sqrt(reps)


def test_alternating_group_on_three_points():
    rng = np.random.default_rng(2)
    seen = Counter(sample_mu_cycle_type(3, 3, rng).parts() for _ in range(30000))
    assert set(seen) == {(1, 1, 1), (3,)}
    assert abs(seen[(3,)] / 30000 - 2 / 3) < 4 * math.sqrt(2 / 9 / 30000)


def test_odd_k_outputs_even_types():
    rng = np.random.default_rng(3)
    for n in (2, 5, 9, 40):
        for _ in range(300):
            assert sample_mu_cycle_type(n, 5, rng).sign == 1


def test_even_k_matches_uniform_law():
    """mu for even k is uniform on S_n: compare class frequencies to 1/z_lambda."""
    n, reps = 5, 100_000
    rng = np.random.default_rng(4)
    seen = Counter(sample_mu_cycle_type(n, 4, rng).parts() for _ in range(reps))
    for parts in enumerate_partitions(n).partitions:
        p = 1 / z_lambda(parts)
        assert abs(seen[parts] / reps - p) < 4 * math.sqrt(p * (1 - p) / reps)


def test_poisson_moments():
    z = sample_poisson_small(6, np.random.default_rng(5), size=200_000)
    assert abs(z[:, 0].mean() - 1) < 0.01
    assert abs(z[:, 5].mean() - 1 / 6) < 0.005
    assert abs(z[:, 1].var() - 0.5) < 0.01


def test_class_weight_examples():
    assert class_weight((3,), 3, 2) == Fraction(1, 3)
    assert class_weight((2, 1), 3, 3) == 0
    with pytest.raises(ValueError):
        class_weight((2, 2), 3, 2)


@pytest.mark.parametrize("n", range(1, 13))
@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_class_weights_sum_to_one(n, k):
    assert sum(class_weight(p, n, k) for p in enumerate_partitions(n).partitions) == 1


def brute_small_cycle_tv(n, K, k):
    """Enumerate S_n directly and compare with the Poisson law on (N_1..N_K)."""
    law = Counter()
    total = 0
    for perm in itertools.permutations(range(n)):
        seen, parts = [False] * n, []
        for x in range(n):
            if not seen[x]:
                y, m = x, 0
                while not seen[y]:
                    seen[y] = True
                    y, m = perm[y], m + 1
                parts.append(m)
        if k % 2 == 1 and (n - len(parts)) % 2:
            continue
        total += 1
        law[tuple(parts.count(i) for i in range(1, K + 1))] += 1
    tv = 0.0
    covered = 0.0
    for key, c in law.items():
        q = math.prod(math.exp(-1 / i) * (1 / i) ** m / math.factorial(m)
                      for i, m in enumerate(key, 1))
        covered += q
        tv += abs(c / total - q)
    return 0.5 * (tv + (1 - covered))


@pytest.mark.parametrize("n,K,k", [(5, 2, 2), (6, 3, 2), (6, 2, 3), (7, 3, 3), (7, 7, 2)])
def test_exact_small_cycle_tv_against_enumeration(n, K, k):
    assert small_cycle_tv_exact(n, K, k) == pytest.approx(brute_small_cycle_tv(n, K, k), abs=1e-12)


def test_exact_small_cycle_tv_is_tiny_at_scale():
    assert small_cycle_tv_exact(4096, 16, 2) < 1e-12
    assert small_cycle_tv_exact(4096, 16, 3) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_statistic_encodes_mass_and_parity(K, seed):
    counts = np.zeros((1, K + 1), dtype=np.int64)
    counts[0, 1:] = np.random.default_rng(seed).integers(0, 3, K)
    s = int(small_cycle_statistic(counts, K)[0])
    mass = sum(i * counts[0, i] for i in range(1, K + 1))
    assert s // 2 == mass
    assert s % 2 == sum((i - 1) * counts[0, i] for i in range(1, K + 1)) % 2


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 300), st.sampled_from([2, 3, 4, 5]), st.integers(0, 2**32 - 1))
def test_mu_samples_are_partitions(n, k, seed):
    counts = sample_mu_counts(n, k, 5, np.random.default_rng(seed))
    assert np.all(counts @ np.arange(n + 1) == n)
    if k % 2:
        assert np.all((n - counts.sum(axis=1)) % 2 == 0)
