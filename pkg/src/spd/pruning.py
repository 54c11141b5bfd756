"""Magnitude pruning via Euclidean projection onto a sparsity budget.

Keeping the ceil(numel * (1 - theta)) largest-magnitude entries and
zeroing the rest IS the closest point (in L2) among all matrices meeting
the budget, checked exhaustively in the tests.  Each weight matrix is
projected independently.  Ties in magnitude break toward the lower flat
index so reruns are identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .tensor import Tensor


@dataclass
class SparsityMask:
    """Survivor mask for one weight matrix (1 = kept, 0 = pruned)."""

    layer: int
    name: str
    mask: np.ndarray  # float64 of {0.0, 1.0}, same shape as the weights

    @property
    def realized_sparsity(self) -> float:
        return float(np.count_nonzero(self.mask == 0.0)) / self.mask.size


@dataclass(frozen=True)
class SparsitySchedule:
    """Ramp from dense to the per-layer target over the pruning phase."""

    target: float | tuple      # scalar applied to every layer, or one per layer
    t1: int                    # last pruning step; the ramp reaches target here
    mode: str = "cubic"

    def __post_init__(self):
        if self.mode not in ("cubic", "linear"):
            raise ContractError(f"unknown ramp mode {self.mode!r}")
        for th in self._targets():
            if not 0.0 <= th < 1.0:
                raise ContractError(f"sparsity target must be in [0, 1), got {th}")
        if self.t1 < 0:
            raise ContractError(f"t1 must be nonnegative, got {self.t1}")

    def _targets(self):
        return self.target if isinstance(self.target, tuple) else (self.target,)

    def target_for(self, layer: int) -> float:
        if isinstance(self.target, tuple):
            return self.target[layer]
        return self.target


def step_sparsity(schedule: SparsitySchedule, t: int, layer: int = 0) -> float:
    """Sparsity in force at step t; holds the target after t1."""
    if t < 0:
        raise ContractError(f"step must be nonnegative, got {t}")
    theta = schedule.target_for(layer)
    if t >= schedule.t1 or schedule.t1 == 0:
        return theta
    frac = t / schedule.t1
    if schedule.mode == "linear":
        return theta * frac
    return theta * (1.0 - (1.0 - frac) ** 3)


def project(weights: np.ndarray, theta: float):
    """Euclidean projection onto {sparsity >= theta}.

    Zeroes the ceil(numel * theta) smallest-|entries| (the realized
    sparsity is >= theta, and exceeds it by less than one element's
    worth); the survivors are the largest-magnitude entries, which is
    the L2-closest point in the feasible set.  The 1e-9 slack keeps
    float fuzz in numel * theta from zeroing one extra element.
    """
    if not 0.0 <= theta < 1.0:
        raise ContractError(f"theta must be in [0, 1), got {theta}")
    flat = np.abs(np.asarray(weights, dtype=np.float64).reshape(-1))
    zeros = int(np.ceil(flat.size * theta - 1e-9))
    keep = flat.size - zeros
    mask = np.zeros(flat.size, dtype=np.float64)
    # stable sort: equal magnitudes keep their flat order, lowest index wins
    order = np.argsort(-flat, kind="stable")
    mask[order[:keep]] = 1.0
    mask = mask.reshape(weights.shape)
    return weights * mask, mask


def apply_mask(weight: Tensor, mask: np.ndarray) -> None:
    """Zero the pruned coordinates of a weight tensor, in place.
    Idempotent: (W * M) * M == W * M."""
    if mask.shape != weight.shape:
        raise ShapeError(
            f"mask shape {mask.shape} does not match weights {weight.shape}"
        )
    weight.data *= mask


def prune_layer(layer, layer_index: int, theta: float) -> dict:
    """Project every prunable matrix of one encoder layer in place.
    Returns {param_name: SparsityMask}."""
    masks = {}
    for name, tensor in layer.prunable():
        projected, mask = project(tensor.data, theta)
        tensor.data = projected
        masks[name] = SparsityMask(layer=layer_index, name=name, mask=mask)
    return masks
