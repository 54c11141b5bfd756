"""Decoupled-weight-decay adaptive optimizer with triangular learning-rate
schedules, supporting the two-independent-optimizers training regime
(one for pruning+grafting, a freshly initialized one for finetuning).

The per-element update runs through the kernels backend (compiled or
numpy, bit-identical either way); see spd._kernels.fallback.adamw_update
for the exact operation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import adamw_update
from .errors import ConfigError, NumericError
from .tensor import Tensor


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to peak_lr, then linear decay to zero at total_steps."""

    peak_lr: float
    warmup_steps: int
    total_steps: int

    def __post_init__(self):
        if self.peak_lr < 0:
            raise ConfigError(f"peak_lr must be nonnegative, got {self.peak_lr}")
        if self.total_steps < 0 or self.warmup_steps < 0:
            raise ConfigError("schedule lengths must be nonnegative")
        if self.warmup_steps > self.total_steps:
            raise ConfigError(
                f"warmup ({self.warmup_steps}) longer than schedule ({self.total_steps})"
            )

    @staticmethod
    def from_span(peak_lr: float, total_steps: int,
                  warmup_frac: float = 0.06) -> "LrSchedule":
        return LrSchedule(peak_lr=peak_lr,
                          warmup_steps=int(round(total_steps * warmup_frac)),
                          total_steps=total_steps)

    def at(self, t: int) -> float:
        """Learning rate for step t (0-based within this schedule's span)."""
        if self.total_steps == 0:
            return 0.0
        if t >= self.total_steps:
            return 0.0
        if t < self.warmup_steps:
            return self.peak_lr * t / self.warmup_steps
        span = self.total_steps - self.warmup_steps
        return self.peak_lr * (self.total_steps - t) / span


class AdamW:
    """Adam with decoupled weight decay over a named parameter list.

    `step(active=...)` restricts the update to a subset of parameter
    names (ungrafted modules sit out a step but keep their state).
    `masks` pins pruned coordinates: after each update, masked weights
    AND their moments are re-zeroed so dead coordinates cannot drift or
    resurrect through stale momentum.
    """

    def __init__(self, named_params, schedule: LrSchedule,
                 betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, grad_clip: float | None = None):
        self.named_params = [(n, p) for n, p in named_params]
        names = [n for n, _ in self.named_params]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter names in optimizer")
        self.schedule = schedule
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.t = 0
        self.last_lr = 0.0
        self.m = {n: np.zeros_like(p.data) for n, p in self.named_params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.named_params}

    def _clip(self, params):
        total = 0.0
        for _, p in params:
            if p.grad is not None:
                total += float(np.sum(p.grad * p.grad))
        norm = np.sqrt(total)
        if norm > self.grad_clip:
            factor = self.grad_clip / norm
            for _, p in params:
                if p.grad is not None:
                    p.grad *= factor

    def step(self, active: set | None = None, masks: dict | None = None):
        """One update. Parameters with no gradient buffer are skipped
        entirely (no decay, no moment change)."""
        lr = self.schedule.at(self.t)
        self.t += 1
        self.last_lr = lr
        bias_c1 = 1.0 - self.beta1 ** self.t
        bias_c2 = 1.0 - self.beta2 ** self.t

        live = [(n, p) for n, p in self.named_params
                if (active is None or n in active) and p.grad is not None]
        if self.grad_clip is not None:
            self._clip(live)
        for name, p in live:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"non-finite gradient in parameter {name!r}")
            adamw_update(p.data, p.grad, self.m[name], self.v[name],
                         lr, self.beta1, self.beta2, self.eps,
                         self.weight_decay, bias_c1, bias_c2)
        if masks:
            for name, p in self.named_params:
                mask = masks.get(name)
                if mask is not None:
                    p.data *= mask
                    self.m[name] *= mask
                    self.v[name] *= mask

    def zero_grads(self):
        for _, p in self.named_params:
            p.grad = None

    # -- state snapshots (bit-exact through the checkpoint container) ----

    def state_arrays(self) -> dict:
        out = {}
        for name in self.m:
            out[f"m.{name}"] = self.m[name]
            out[f"v.{name}"] = self.v[name]
        return out

    def state_meta(self) -> dict:
        return {"t": self.t, "last_lr": self.last_lr}

    def load_state(self, meta: dict, arrays: dict):
        self.t = int(meta["t"])
        self.last_lr = float(meta["last_lr"])
        for name in self.m:
            self.m[name] = arrays[f"m.{name}"].copy()
            self.v[name] = arrays[f"v.{name}"].copy()


def two_phase_optimizers(named_params, main_schedule: LrSchedule,
                         finetune_schedule: LrSchedule,
                         betas=(0.9, 0.999), eps: float = 1e-8,
                         weight_decay: float = 0.0,
                         grad_clip: float | None = None):
    """Independent optimizers for phases 1-2 and phase 3.

    The second starts from zero moments and its own warmup; the learning
    rate is allowed to jump at the boundary (both schedules are
    triangular on their own spans).
    """
    params = list(named_params)
    make = lambda sched: AdamW(params, sched, betas=betas, eps=eps,
                               weight_decay=weight_decay, grad_clip=grad_clip)
    return make(main_schedule), make(finetune_schedule)
