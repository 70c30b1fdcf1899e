import math

import numpy as np
import pytest

from panelsurv.errors import EstimationError
from panelsurv.logrank import (
    logrank,
    logrank_from_arrays,
    permutation_null_check,
)

from conftest import random_pairs, spells_from_pairs
from oracles import logrank_oracle


def arrays(pairs):
    return (np.array([a for a, _ in pairs]), np.array([d for _, d in pairs]))


def test_two_singleton_fixture_is_exactly_one():
    # group 1: death at age 1; group 2: death at age 2 (its event time has
    # n=1 and is skipped) -> numerator 0.5, variance 0.25, z exactly 1.0
    result = logrank_from_arrays(*arrays([(1, True)]), *arrays([(2, True)]))
    assert result.z == 1.0
    assert result.p_two_sided == pytest.approx(0.31731050786291415, rel=1e-12)
    skipped = [row for row in result.per_time if row.t == 2]
    assert skipped[0].variance_term == 0.0


def test_identical_groups_give_exact_zero():
    pairs = [(1, True), (2, False), (3, True), (5, True), (8, False)]
    g1 = spells_from_pairs(pairs, prefix="A")
    g2 = spells_from_pairs(pairs, prefix="B")
    result = logrank(g1, g2)
    assert result.z == 0.0
    assert result.p_two_sided == 1.0


def test_label_swap_negates_z_bitwise():
    rng = np.random.default_rng(90)
    for _ in range(25):
        p1 = random_pairs(rng, int(rng.integers(2, 120)))
        p2 = random_pairs(rng, int(rng.integers(2, 120)))
        forward = logrank_from_arrays(*arrays(p1), *arrays(p2))
        backward = logrank_from_arrays(*arrays(p2), *arrays(p1))
        if forward.degenerate:
            assert backward.degenerate
            continue
        assert backward.z == -forward.z  # bit-for-bit
        assert backward.p_two_sided == forward.p_two_sided


def test_matches_fraction_oracle_on_random_inputs():
    rng = np.random.default_rng(91)
    for _ in range(40):
        p1 = random_pairs(rng, int(rng.integers(2, 100)))
        p2 = random_pairs(rng, int(rng.integers(2, 100)))
        result = logrank_from_arrays(*arrays(p1), *arrays(p2))
        z_expected, _, var_expected = logrank_oracle(p1, p2)
        if z_expected is None:
            assert result.degenerate
            continue
        assert result.z == pytest.approx(z_expected, rel=1e-10)


def test_per_time_expected_deaths_partition():
    rng = np.random.default_rng(92)
    p1 = random_pairs(rng, 50)
    p2 = random_pairs(rng, 70)
    result = logrank_from_arrays(*arrays(p1), *arrays(p2))
    for row in result.per_time:
        assert 0.0 <= row.expected1 <= row.d
        expected2 = (row.n - row.n1) * row.d / row.n
        assert row.expected1 + expected2 == pytest.approx(row.d, rel=1e-12)
        assert row.variance_term >= 0.0


def test_spell_order_and_id_relabeling_invariance():
    rng = np.random.default_rng(93)
    p1 = random_pairs(rng, 40)
    p2 = random_pairs(rng, 40)
    g1 = spells_from_pairs(p1, prefix="A")
    g2 = spells_from_pairs(p2, prefix="B")
    base = logrank(g1, g2)
    relabeled = logrank(spells_from_pairs(p1, prefix="X")[::-1],
                        spells_from_pairs(p2, prefix="Y")[::-1])
    assert relabeled.z == base.z


def test_overlapping_ids_rejected():
    g1 = spells_from_pairs([(1, True), (2, True)], prefix="A")
    with pytest.raises(ValueError, match="disjoint"):
        logrank(g1, g1)


def test_empty_group_rejected():
    g1 = spells_from_pairs([(1, True)], prefix="A")
    with pytest.raises(EstimationError):
        logrank(g1, [])


def test_all_censored_pool_is_degenerate():
    result = logrank_from_arrays(*arrays([(3, False)] * 5), *arrays([(4, False)] * 5))
    assert result.degenerate
    assert result.z is None and result.p_two_sided is None


def test_separated_hazards_give_tiny_p_with_correct_sign():
    rng = np.random.default_rng(94)
    # group 1 has double the per-quarter death probability
    def draw(n, hazard):
        ages = rng.geometric(hazard, size=n)
        died = ages <= 40
        return np.minimum(ages, 40), died
    d1, e1 = draw(3000, 0.10)
    d2, e2 = draw(3000, 0.05)
    result = logrank_from_arrays(d1, e1, d2, e2)
    assert result.z > 0  # observed deaths in group 1 exceed expectation
    assert result.p_two_sided < 1e-6
    observed = sum(r.d1 for r in result.per_time)
    expected = sum(r.expected1 for r in result.per_time)
    assert observed > expected


class TestPermutationNullCheck:
    def _pool(self, n=300, seed=95):
        rng = np.random.default_rng(seed)
        return spells_from_pairs(random_pairs(rng, n), prefix="P")

    def test_deterministic_given_seed(self):
        pool = self._pool()
        a = permutation_null_check(pool, 150, replications=200, seed=7)
        b = permutation_null_check(pool, 150, replications=200, seed=7)
        assert a == b

    def test_different_seed_differs(self):
        pool = self._pool()
        a = permutation_null_check(pool, 150, replications=200, seed=7)
        b = permutation_null_check(pool, 150, replications=200, seed=8)
        assert a != b

    def test_single_replication_is_legal(self):
        report = permutation_null_check(self._pool(), 150, replications=1, seed=3)
        assert report.replications == 1
        assert report.valid_replications + report.degenerate_replications == 1
        assert all(p in (0.0, 1.0) for p in report.tail_probs)

    def test_null_calibration_small(self):
        report = permutation_null_check(self._pool(n=400), 200,
                                        replications=2000, seed=11)
        assert abs(report.z_mean) <= 4 / math.sqrt(2000) + 0.1
        assert 0.85 <= report.z_var <= 1.15
        for p in report.tail_probs:
            assert 0.0 <= p <= 1.0

    def test_replication_z_matches_direct_logrank(self):
        # one replication's z must equal the plain two-group statistic on
        # the same split, so reconstruct the split from the same stream
        pool = self._pool(n=80, seed=96)
        report = permutation_null_check(pool, 40, replications=1, seed=5)
        rng = np.random.Generator(np.random.Philox(key=(5 & ((1 << 64) - 1)) | (1 << 64)))
        members = set(rng.permutation(len(pool))[:40].tolist())
        g1 = [s for i, s in enumerate(pool) if i in members]
        g2 = [s for i, s in enumerate(pool) if i not in members]
        direct = logrank(g1, g2)
        threshold_hits = [abs(direct.z) > t for t in report.thresholds]
        assert [p == 1.0 for p in report.tail_probs] == threshold_hits

    def test_degenerate_pool_rejected(self):
        pool = spells_from_pairs([(5, False)] * 20, prefix="C")
        with pytest.raises(EstimationError):
            permutation_null_check(pool, 10, replications=10, seed=1)

    def test_bad_sizes_rejected(self):
        pool = self._pool(n=50)
        with pytest.raises(ValueError):
            permutation_null_check(pool, 0, replications=10, seed=1)
        with pytest.raises(ValueError):
            permutation_null_check(pool, 50, replications=10, seed=1)
        with pytest.raises(ValueError):
            permutation_null_check(pool, 25, replications=0, seed=1)


def test_null_mean_and_variance_at_ten_thousand_replications():
    rng = np.random.default_rng(98)
    pool = spells_from_pairs(random_pairs(rng, 1000, max_age=40), prefix="N")
    report = permutation_null_check(pool, 500, replications=10000, seed=12)
    assert abs(report.z_mean) <= 4 / math.sqrt(10000)
    assert 0.9 <= report.z_var <= 1.1
