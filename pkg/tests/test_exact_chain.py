import math
from fractions import Fraction

import numpy as np
import pytest

from kcycles.exact_chain import (build_transition, enumerate_partitions, full_group_oracle,
                                 mu_vector, tv_at_zero_exact, tv_curve_exact, write_tv_csv)
from kcycles.kcycle_walk import t_mix


def test_partition_counts():
    assert len(enumerate_partitions(3)) == 3
    assert len(enumerate_partitions(5)) == 7
    assert len(enumerate_partitions(12)) == 77
    assert len(enumerate_partitions(40)) == 37338


def test_small_kernels():
    P = build_transition(3, 2)
    t = P.table.index
    assert P.entry(t[(1, 1, 1)], t[(2, 1)]) == 1
    assert P.entry(t[(3,)], t[(2, 1)]) == 1
    P4 = build_transition(4, 2)
    assert P4.entry(P4.table.index[(1,) * 4], P4.table.index[(2, 1, 1)]) == 1


@pytest.mark.parametrize("n,k", [(6, 2), (7, 3), (8, 4), (9, 5)])
def test_rows_are_stochastic_and_mu_invariant(n, k):
    P = build_transition(n, k)
    assert P.row_sums_exact()
    mu = mu_vector(P.table, k, exact=True)
    for j in range(len(P.table)):
        col = sum(mu[i] * P.entry(i, j) for i in range(len(P.table)) if P.counts[i, j])
        assert col == mu[j]


def test_size_limits():
    with pytest.raises(ValueError):
        build_transition(15, 2)
    with pytest.raises(ValueError):
        build_transition(10, 6)


def test_distance_at_zero():
    assert tv_at_zero_exact(4, 2) == Fraction(23, 24)
    assert tv_curve_exact(4, 2, [0.0])[0][1] == pytest.approx(23 / 24, abs=1e-15)
    assert tv_at_zero_exact(12, 3) == 1 - Fraction(2, math.factorial(12))


def test_monotone_profile():
    grid = np.linspace(0, 3 * t_mix(9, 2), 40)
    d = [v for _, v in tv_curve_exact(9, 2, grid)]
    assert all(a >= b - 1e-13 for a, b in zip(d, d[1:]))


def test_regression_anchors():
    # frozen outputs of the exact computation (cross-checked by the whole-group oracle at n <= 6)
    t = 8 * math.log(8) / 2
    d = tv_curve_exact(8, 2, [t])[0][1]
    assert d == pytest.approx(0.223948829113605, abs=1e-12)
    assert 0.01 < d < tv_at_zero_exact(8, 2)
    assert tv_curve_exact(4, 2, [1.0])[0][1] == pytest.approx(0.5118637216392146, abs=1e-12)


@pytest.mark.parametrize("n,k", [(n, k) for n in range(2, 7) for k in (2, 3) if k <= n])
def test_class_chain_matches_whole_group(n, k):
    for t in (0.5, 2.0, t_mix(n, k)):
        law = full_group_oracle(n, k, t)
        assert law.max_class_spread < 1e-12
        assert tv_curve_exact(n, k, [t])[0][1] == pytest.approx(law.tv_to_mu(), abs=1e-10)


def test_whole_group_at_zero():
    law = full_group_oracle(5, 2, 0.0)
    assert law.probs[0] == 1.0 and law.probs.sum() == pytest.approx(1.0)


def test_csv_round_trip(tmp_path):
    rows = tv_curve_exact(5, 2, [0.0, 1.0])
    path = tmp_path / "tv.csv"
    write_tv_csv(path, rows, "test run")
    lines = path.read_text().splitlines()
    assert lines[0] == "# test run" and lines[1] == "t,d_exact"
    assert float(lines[2].split(",")[1]) == pytest.approx(1 - 1 / 120, abs=1e-11)
