"""Projection exactness/optimality (brute-force oracle over all masks),
ramp shape, and mask idempotence."""

from itertools import combinations

import numpy as np
import pytest

from spd.errors import ContractError, ShapeError
from spd.pruning import (
    SparsityMask,
    SparsitySchedule,
    apply_mask,
    project,
    prune_layer,
    step_sparsity,
)
from spd.rng import Rng
from spd.tensor import Tensor


def best_by_brute_force(w, keep):
    """Minimum ||W - Y||_2 over every mask keeping exactly `keep` entries."""
    flat = w.reshape(-1)
    best = np.inf
    for kept in combinations(range(flat.size), keep):
        y = np.zeros_like(flat)
        y[list(kept)] = flat[list(kept)]
        best = min(best, np.linalg.norm(flat - y))
    return best


class TestProject:
    def test_zero_theta_is_identity(self):
        rng = Rng(0)
        w = rng.uniform(-1, 1, 12).reshape(3, 4)
        out, mask = project(w, 0.0)
        np.testing.assert_array_equal(out, w)
        np.testing.assert_array_equal(mask, np.ones_like(w))

    def test_hand_case(self):
        w = np.array([[0.1, -0.9], [0.5, 0.2]])
        out, mask = project(w, 0.5)
        np.testing.assert_array_equal(out, [[0.0, -0.9], [0.5, 0.0]])
        np.testing.assert_array_equal(mask, [[0.0, 1.0], [1.0, 0.0]])

    def test_zero_count_is_ceiling_of_budget(self):
        w = Rng(1).uniform(-1, 1, 9).reshape(3, 3)
        # 9 elements: the only representable sparsity >= 0.89 is 9/9
        for theta, zeros in ((0.5, 5), (0.89, 9), (0.1, 1), (0.34, 4)):
            _, mask = project(w, theta)
            assert int((mask == 0.0).sum()) == zeros

    def test_realized_sparsity_at_least_target(self):
        rng = Rng(2)
        for theta in (0.25, 0.5, 0.8, 0.95, 0.35):
            w = rng.uniform(-1, 1, 64).reshape(8, 8)
            _, mask = project(w, theta)
            realized = 1.0 - mask.sum() / mask.size
            assert realized >= theta - 1e-12
            # never overshoot by more than one element
            assert realized < theta + 1.0 / mask.size + 1e-12

    def test_changes_only_zeroed_positions(self):
        w = Rng(3).uniform(-1, 1, 30).reshape(5, 6)
        out, mask = project(w, 0.6)
        np.testing.assert_array_equal(out[mask == 1.0], w[mask == 1.0])
        assert np.all(out[mask == 0.0] == 0.0)

    def test_euclidean_optimality_brute_force(self):
        rng = Rng(4)
        for trial in range(30):
            w = rng.uniform(-1, 1, 9).reshape(3, 3)
            theta = [0.2, 0.5, 0.75][trial % 3]
            out, mask = project(w, theta)
            keep = int(mask.sum())
            ours = np.linalg.norm((w - out).reshape(-1))
            assert ours <= best_by_brute_force(w, keep) + 1e-15

    def test_ties_break_to_lower_flat_index(self):
        w = np.array([0.5, -0.5, 0.5, 0.5])
        _, mask = project(w, 0.5)
        np.testing.assert_array_equal(mask, [1.0, 1.0, 0.0, 0.0])

    def test_theta_one_rejected(self):
        with pytest.raises(ContractError):
            project(np.ones(4), 1.0)


class TestRamp:
    SCHED = SparsitySchedule(target=0.9, t1=100, mode="cubic")

    def test_boundaries(self):
        assert step_sparsity(self.SCHED, 0) == 0.0
        assert step_sparsity(self.SCHED, 100) == 0.9

    def test_cubic_midpoint(self):
        np.testing.assert_allclose(step_sparsity(self.SCHED, 50),
                                   0.9 * (1 - 0.125), rtol=1e-15)

    def test_linear_midpoint(self):
        sched = SparsitySchedule(target=0.8, t1=200, mode="linear")
        np.testing.assert_allclose(step_sparsity(sched, 50), 0.2, rtol=1e-15)

    def test_clamps_after_t1(self):
        assert step_sparsity(self.SCHED, 1000) == 0.9

    def test_monotone_nondecreasing(self):
        vals = [step_sparsity(self.SCHED, t) for t in range(0, 101)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_per_layer_targets(self):
        sched = SparsitySchedule(target=(0.5, 0.9), t1=10)
        assert step_sparsity(sched, 10, layer=0) == 0.5
        assert step_sparsity(sched, 10, layer=1) == 0.9

    def test_bad_mode_and_target(self):
        with pytest.raises(ContractError):
            SparsitySchedule(target=0.5, t1=10, mode="quadratic")
        with pytest.raises(ContractError):
            SparsitySchedule(target=1.0, t1=10)


class TestApplyMask:
    def test_all_ones_noop(self):
        t = Tensor(Rng(5).uniform(-1, 1, 6).reshape(2, 3))
        before = t.data.copy()
        apply_mask(t, np.ones((2, 3)))
        np.testing.assert_array_equal(t.data, before)

    def test_idempotent(self):
        t = Tensor(Rng(6).uniform(-1, 1, 8).reshape(2, 4))
        _, mask = project(t.data, 0.5)
        apply_mask(t, mask)
        once = t.data.copy()
        apply_mask(t, mask)
        np.testing.assert_array_equal(t.data, once)

    def test_shape_guard(self):
        with pytest.raises(ShapeError):
            apply_mask(Tensor(np.zeros((2, 2))), np.ones(3))


class TestPruneLayer:
    def test_prunes_all_six_matrices(self):
        from spd.model import EncoderLayer, ModelConfig

        layer = EncoderLayer(
            ModelConfig(num_layers=1, d_model=8, num_heads=2, d_ff=16,
                        vocab_size=4, max_seq_len=4, num_classes=2),
            Rng(7),
        )
        masks = prune_layer(layer, 0, 0.5)
        assert sorted(masks) == ["w_ff1", "w_ff2", "w_k", "w_o", "w_q", "w_v"]
        for name, sm in masks.items():
            assert isinstance(sm, SparsityMask)
            assert sm.realized_sparsity >= 0.5 - 1e-12
            weights = getattr(layer, name).data
            assert np.all(weights[sm.mask == 0.0] == 0.0)
        # biases and layer norms untouched by construction
        assert np.all(layer.ln1_g.data == 1.0)
