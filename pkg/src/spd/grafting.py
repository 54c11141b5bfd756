"""Per-layer Bernoulli substitution of teacher layers by student modules.

The substitution probability follows a three-phase schedule: constant p0
while pruning (t < t1), linear ramp k*(t - t1) + p0 up to 1.0 during the
grafting phase (t1 <= t < t2), then pinned at 1.0 for finetuning.  The
slope is fixed by the schedule ends: k = (1 - p0) / (t2 - t1), so the
probability reaches exactly 1 at t2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .model import EncoderModel, ForwardTrace
from .rng import Rng


@dataclass(frozen=True)
class GraftSchedule:
    p0: float
    t1: int
    t2: int
    t3: int

    def __post_init__(self):
        if not 0.0 < self.p0 <= 1.0:
            raise ConfigError(f"p0 must be in (0, 1], got {self.p0}")
        if not self.t1 < self.t2 <= self.t3:
            raise ConfigError(
                f"phase boundaries must satisfy t1 < t2 <= t3, "
                f"got t1={self.t1}, t2={self.t2}, t3={self.t3}"
            )

    @property
    def slope(self) -> float:
        return (1.0 - self.p0) / (self.t2 - self.t1)


def probability_at(schedule: GraftSchedule, t: int) -> float:
    """Grafting probability in force at step t (piecewise linear,
    continuous at t1, exactly 1.0 from t2 on)."""
    if t < schedule.t1:
        return schedule.p0
    if t >= schedule.t2:
        return 1.0
    return min(1.0, schedule.slope * (t - schedule.t1) + schedule.p0)


@dataclass
class GraftMask:
    """Per-layer substitution indicators for one optimization step."""

    bits: np.ndarray  # int {0,1}, one per encoder layer

    @property
    def rate(self) -> float:
        return float(self.bits.mean())


def draw_mask(p: float, rng: Rng, num_layers: int) -> GraftMask:
    """One independent Bernoulli(p) draw per layer, consumed from the
    stream in layer order 1..N."""
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"probability must be in [0, 1], got {p}")
    return GraftMask(bits=rng.bernoulli(p, num_layers))


class GraftedModel:
    """Teacher with some layers routed through the student bank.

    Embeddings and the classifier head always come from the student copy
    (the head is trainable; the embedding copies stay frozen and remain
    equal to the teacher's).  Encoder layer i runs the student module
    when bit i is set, else the frozen teacher layer.
    """

    def __init__(self, teacher: EncoderModel, student: EncoderModel,
                 mask: GraftMask):
        if teacher.cfg != student.cfg:
            raise ContractError(
                f"teacher and student configs differ: {teacher.cfg} vs {student.cfg}"
            )
        if len(mask.bits) != teacher.cfg.num_layers:
            raise ContractError(
                f"mask has {len(mask.bits)} bits for {teacher.cfg.num_layers} layers"
            )
        self.teacher = teacher
        self.student = student
        self.mask = mask

    def forward(self, token_ids, segment_ids=None, lengths=None) -> ForwardTrace:
        override = [
            None if bit else self.teacher.layers[i]
            for i, bit in enumerate(self.mask.bits)
        ]
        return self.student.forward(token_ids, segment_ids=segment_ids,
                                    lengths=lengths, layer_override=override)


def compose_grafted(teacher: EncoderModel, student: EncoderModel,
                    mask: GraftMask) -> GraftedModel:
    return GraftedModel(teacher, student, mask)
