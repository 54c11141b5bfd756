"""Subset-sum search: exact-hit cases, oracle equivalence between the
meet-in-the-middle search and full enumeration, coverage behaviour, and
failure-rate properties."""

import numpy as np
import pytest

from spd.errors import ContractError
from spd.rng import Rng
from spd.subsetsum import (
    BoundReport,
    SubsetInstance,
    best_subset_error,
    coverage_epsilon,
    default_grid,
    delta_sweep,
    failure_rate,
    naive_best_error,
    seq1_value_report,
    sweep_csv,
)


class TestBestSubsetError:
    def test_exact_hit(self):
        err, subset = best_subset_error([0.5, -0.25], 0.25)
        assert err == 0.0
        assert subset == (0, 1)

    def test_hand_enumeration(self):
        # sums: {} = 0, {0} = 0.5, {1} = -0.25, {0,1} = 0.25
        err, subset = best_subset_error([0.5, -0.25], 0.3)
        np.testing.assert_allclose(err, 0.05, rtol=1e-12)
        assert subset == (0, 1)

    def test_zero_target_empty_subset(self):
        rng = Rng(0)
        for seed in range(5):
            err, subset = best_subset_error(Rng(seed).uniform(-1, 1, 10), 0.0)
            assert err == 0.0
            assert subset == ()

    def test_error_bounded_by_target_magnitude(self):
        for seed in range(10):
            w = Rng(seed).uniform(-1, 1, 12)
            t = float(Rng(seed + 99).uniform(-0.5, 0.5))
            err, _ = best_subset_error(w, t)
            assert err <= abs(t) + 1e-15

    def test_returned_subset_achieves_error(self):
        for seed in range(10):
            w = Rng(seed).uniform(-1, 1, 11)
            t = float(Rng(seed + 50).uniform(-0.5, 0.5))
            err, subset = best_subset_error(w, t)
            # re-accumulate in index order, like the search does
            acc = 0.0
            for i in subset:
                acc = acc + w[i]
            assert abs(t - acc) <= err + 1e-15

    def test_monotone_under_extension(self):
        # adding a weight can only improve the best error
        for seed in range(5):
            w = Rng(seed).uniform(-1, 1, 10)
            for t in (-0.4, 0.1, 0.37):
                e_small, _ = best_subset_error(w[:8], t)
                e_big, _ = best_subset_error(w, t)
                assert e_big <= e_small + 1e-15

    def test_too_large_pool_mentions_sampled_mode(self):
        with pytest.raises(ContractError, match="sampled"):
            best_subset_error(np.zeros(31), 0.1)


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", [1, 2, 5, 9, 14])
    def test_mitm_equals_naive_enumeration(self, n):
        for seed in range(5):
            w = Rng(seed * 7 + n).uniform(-1, 1, n)
            for t in (-0.5, -0.123, 0.0, 0.25, 0.5):
                mitm, _ = best_subset_error(w, t)
                assert mitm == naive_best_error(w, t)


class TestCoverage:
    def test_single_weight_coarse_grid(self):
        # n=1, w={1.0}: targets {-0.5, 0, 0.5}; best errors 0.5, 0, 0.5
        worst = coverage_epsilon([1.0], grid=np.array([-0.5, 0.0, 0.5]))
        assert worst == 0.5

    def test_exact_endpoint_hits(self):
        worst = coverage_epsilon([0.5, -0.5], grid=np.array([-0.5, 0.5]))
        assert worst == 0.0

    def test_default_grid_bounds(self):
        g = default_grid()
        assert g[0] == -0.5 and g[-1] == 0.5
        assert len(g) == 101
        np.testing.assert_allclose(np.diff(g), 0.01, rtol=1e-12)

    def test_golden_instance_reproduces(self):
        # frozen via the enumeration oracle on the seed-fixed instance
        inst = SubsetInstance.draw(16, Rng(2024, stream=0))
        value = coverage_epsilon(inst)
        oracle = max(naive_best_error(inst, t) for t in default_grid())
        assert value == oracle
        assert value == coverage_epsilon(inst)
        golden = 0.00014615574734344605
        np.testing.assert_allclose(value, golden, rtol=0, atol=0)

    def test_coverage_shrinks_with_pool_size(self):
        rng = Rng(5)
        w = rng.uniform(-1, 1, 16)
        small = coverage_epsilon(w[:6])
        big = coverage_epsilon(w)
        assert big <= small


class TestFailureRate:
    def test_epsilon_half_never_fails(self):
        # the empty subset alone achieves error <= 0.5 on the target interval
        report = failure_rate(n=4, epsilon=0.5, trials=100, seed=0)
        assert report.delta_hat == 0.0

    def test_tiny_epsilon_small_pool_fails_almost_always(self):
        report = failure_rate(n=4, epsilon=0.001, trials=100, seed=1)
        assert report.delta_hat > 0.9

    def test_delta_nonincreasing_in_n(self):
        # 2-sigma slack per comparison at 150 trials
        reports = delta_sweep((4, 8, 12), epsilon=0.05, trials=150, seed=7)
        sigma = np.sqrt(0.25 / 150)
        for a, b in zip(reports, reports[1:]):
            assert b.delta_hat <= a.delta_hat + 2 * sigma

    def test_report_fields_and_csv(self):
        reports = delta_sweep((4, 6), epsilon=0.05, trials=50, seed=3)
        text = sweep_csv(reports)
        lines = text.strip().split("\n")
        assert lines[0] == "n,epsilon,trials,failures,delta_hat,implied_c"
        assert len(lines) == 3
        rep = reports[0]
        d = rep.to_dict()
        assert d["n"] == 4 and 0.0 <= d["delta_hat"] <= 1.0
        if rep.failures:
            np.testing.assert_allclose(
                rep.implied_c, rep.n / np.log(2 / rep.delta_hat), rtol=1e-12)

    def test_trial_streams_independent_of_order(self):
        a = failure_rate(n=6, epsilon=0.05, trials=50, seed=11)
        b = failure_rate(n=6, epsilon=0.05, trials=50, seed=11)
        assert a.failures == b.failures

    def test_needs_trials(self):
        with pytest.raises(ContractError):
            failure_rate(n=4, epsilon=0.1, trials=0, seed=0)


class TestSeq1ValueReport:
    def test_large_pool_meets_epsilon(self):
        report = seq1_value_report(out_dim=4, pool_size=16, epsilon=0.05,
                                   trials=20, seed=0)
        assert report["within_epsilon_rate"] >= 0.9
        assert report["max_gap"] < 0.5

    def test_small_pool_struggles(self):
        rough = seq1_value_report(out_dim=4, pool_size=3, epsilon=0.001,
                                  trials=20, seed=0)
        assert rough["within_epsilon_rate"] < 0.5

    def test_reproducible(self):
        a = seq1_value_report(4, 10, 0.05, 10, seed=3)
        b = seq1_value_report(4, 10, 0.05, 10, seed=3)
        assert a == b
