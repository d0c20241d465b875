from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kcycles.coupling import (CoupledPair, coupled_k_cycle, coupled_transposition, coupling_time,
                              grid_round, grid_round_cells, match_parts, phi_bijection_failures,
                              phi_map, ruin_probability, ruin_probability_linear, small_cutoff,
                              warm_coupled_start, write_runs_csv)
from kcycles.exact_chain import build_transition
from kcycles.streams import spawn


def test_grid_round():
    assert grid_round(0.15, 10) == Fraction(1, 5)
    assert grid_round(0.2, 10) == Fraction(1, 5)
    assert grid_round(1 / 50 + 1e-9, 50) == Fraction(2, 50)
    assert grid_round_cells(5) == 3 and grid_round_cells(4) == 2


def test_matching_examples():
    assert CoupledPair([3, 2, 1], [3, 2, 1]).L == 0
    assert match_parts([5, 3], [4, 4]) == ([], [5, 3], [4, 4])
    assert CoupledPair([5, 3], [4, 4]).L == 4
    m, uy, uz = match_parts([4, 3, 1], [4, 2, 2])
    assert m == [4] and uy == [3, 1] and uz == [2, 2]
    assert CoupledPair([4, 3, 1], [4, 2, 2]).L == 4


def test_phi_on_grid_example():
    got = {v: phi_map(5, 8, 10, v) for v in range(1, 11)}
    assert [got[v] for v in (4, 5, 6, 7, 8)] == [7, 8, 4, 5, 6]
    assert all(got[v] == v for v in (1, 2, 3, 9, 10))


def test_phi_off_grid_example_is_a_rotation():
    got = {v: phi_map(4, 7, 10, v) for v in range(1, 11)}
    assert [got[v] for v in (4, 5, 6, 7)] == [7, 4, 5, 6]
    assert sorted(got.values()) == list(range(1, 11))


def test_phi_requires_ordered_sizes():
    with pytest.raises(ValueError):
        phi_map(7, 4, 10, 3)


def test_phi_bijective_for_all_small_grids():
    failures, cases = phi_bijection_failures(64)
    assert failures == 0 and cases > 0


def test_phi_mutation_is_caught():
    def shifted(a, b, n, v):
        return phi_map(a, b, n, v) + (1 if v == n else 0)
    assert phi_bijection_failures(10, shifted)[0] > 0


def test_all_matched_stays_coupled():
    rng = np.random.default_rng(1)
    pair = CoupledPair([5, 4, 2, 1], [5, 4, 2, 1], strict=True)
    for _ in range(200):
        coupled_transposition(pair, rng)
        assert pair.L == 0 and pair.Y.parts() == pair.Z.parts()


@pytest.mark.parametrize("y,z", [((3, 2, 1), (4, 1, 1)), ((6,), (3, 2, 1)), ((2, 2, 2), (5, 1))])
def test_each_copy_moves_like_the_transposition_chain(y, z):
    """Marginal one-step laws of both copies equal the exact cycle-type kernel."""
    n, reps = 6, 30000
    P = build_transition(n, 2)
    rng = np.random.default_rng(2)
    got_y, got_z = Counter(), Counter()
    for _ in range(reps):
        pair = CoupledPair(y, z)
        coupled_transposition(pair, rng)
        got_y[tuple(pair.Y.parts())] += 1
        got_z[tuple(pair.Z.parts())] += 1
    for start, got in ((y, got_y), (z, got_z)):
        row = P.to_float()[P.table.index[tuple(start)]]
        support = np.nonzero(row)[0]
        assert set(got) <= {P.table.partitions[j] for j in support}
        obs = [got[P.table.partitions[j]] for j in support]
        if len(support) > 1:
            assert stats.chisquare(obs, row[support] * reps).pvalue > 1e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(16, 200))
def test_transposition_invariants_k2(seed, n):
    rng = np.random.default_rng(seed)
    pair = warm_coupled_start(n, 2, rng, chi=0.5)
    for _ in range(200):
        coupled_transposition(pair, rng)
        pair.check()
    assert pair.violations["L_increase"] == 0
    assert pair.violations["U_halving"] == 0
    assert pair.violations["phi"] == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([3, 4, 5]))
def test_k_cycle_keeps_sign_difference(seed, k):
    rng = np.random.default_rng(seed)
    pair = warm_coupled_start(120, k, rng, chi=0.5)
    for _ in range(100):
        before = pair.L % 2
        coupled_k_cycle(pair, k, rng)
        pair.check()
        assert pair.L % 2 == before
        assert pair.Y.sign() == pair.Z.sign()


def test_k_equal_two_is_one_transposition():
    rng = np.random.default_rng(3)
    pair = CoupledPair([4, 4], [5, 3])
    assert len(coupled_k_cycle(pair, 2, rng)) == 1


def test_coupled_start_gives_zero_time():
    run = coupling_time(CoupledPair([3, 3], [3, 3]), 2, 0, 100.0)
    assert run.T == 0 and not run.timeout and run.steps == 0


def test_timeout_reported():
    run = coupling_time(CoupledPair([60, 40], [99, 1]), 2, np.random.default_rng(4), 0.5)
    assert run.timeout and run.T == 0.5


def test_coupling_fast_with_many_unmatched_parts():
    n, k = 1024, 2
    delta = n ** 0.625 * np.log(n)
    times = [coupling_time(warm_coupled_start(n, k, g, chi=0.5), k, g, 10 * n).T
             for g in spawn(5, 60)]
    assert np.median(times) <= 64 * n ** 0.625
    assert np.mean(np.array(times) <= delta) >= 0.8


def test_small_cutoff():
    assert small_cutoff(4096) == 1024
    assert small_cutoff(1024, 0.5) == 32


def test_warm_start_matches_small_parts():
    pair = warm_coupled_start(512, 3, np.random.default_rng(6), chi=0.5)
    K = small_cutoff(512, 0.5)
    small = lambda parts: sorted(s for s in parts if s < K)
    assert small(pair.Y.parts()) == small(pair.Z.parts())
    assert pair.Y.sign() == pair.Z.sign()


def test_ruin_symmetric():
    for j0, j1 in [(5, 0), (10, 3), (4, 3)]:
        assert ruin_probability(j0, j1, lambda m: 0.5) == pytest.approx(1 / (j0 - j1))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=5, max_size=5))
def test_ruin_matches_linear_solve(ps):
    p = {m: v for m, v in zip(range(1, 6), ps)}
    exact = ruin_probability(6, 0, p)
    assert exact == pytest.approx(ruin_probability_linear(6, 0, p), rel=1e-9)
    # leaving j0 downward to j0 - 1, then either absorbing or not
    assert ruin_probability(6, 5, p) == 1.0


def test_ruin_rejects_degenerate_step_law():
    n = 2**24
    p = lambda m: 6 * n ** 0.125 * 2**m / n
    with pytest.raises(ValueError):
        ruin_probability(20, 17, p)  # p_19 = 1.5


def test_ruin_decays_in_a_valid_regime():
    n = 2**40
    p = lambda m: 6 * n ** 0.125 * 2**m / n
    assert ruin_probability(25, 20, p) < 1e-8


def test_runs_csv(tmp_path):
    path = tmp_path / "r.csv"
    write_runs_csv(path, [(0, 1.5, 0, 0, 0, 0, 0)], "cfg")
    lines = path.read_text().splitlines()
    assert lines[1] == "seed,T,timeout,phi_violations,L_increase,U_halving,repetition"
