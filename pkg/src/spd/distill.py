"""Layer-wise distillation losses between a teacher trace and a student
(grafted-model) trace.

Loss layout over a model with N encoder layers:

* layers 1..N: mean-squared error on hidden states plus mean-squared
  error on attention distributions, each summed over the batch;
* layer N+1: soft cross-entropy between teacher probabilities and
  temperature-scaled student log-probabilities, summed over the batch.

Only the student logits are divided by the temperature; set
``symmetric_temperature`` to scale the teacher side as well.  The
teacher trace enters as constants, so no gradient ever reaches teacher
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, ShapeError
from .model import ForwardTrace
from .tensor import Tensor


@dataclass(frozen=True)
class KdConfig:
    """Per-layer coefficients (length N+1) and softmax temperature."""

    layer_weights: tuple
    temperature: float = 1.0
    symmetric_temperature: bool = False
    match_attention_scores: bool = False  # pre-softmax scores instead of probs

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if any(w < 0 for w in self.layer_weights):
            raise ConfigError("layer_weights must be nonnegative")

    @staticmethod
    def uniform(num_layers: int, temperature: float = 1.0) -> "KdConfig":
        return KdConfig(layer_weights=(1.0,) * (num_layers + 1),
                        temperature=temperature)


def _stable_softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _batch_sum_mse(student: Tensor, teacher_data: np.ndarray) -> Tensor:
    """Per-example MSE summed over the batch = full-tensor MSE times B."""
    if student.shape != teacher_data.shape:
        raise ShapeError(
            f"trace shapes disagree: student {student.shape} vs teacher {teacher_data.shape}"
        )
    batch = student.shape[0]
    return T.scale(T.mse(student, Tensor(teacher_data)), float(batch))


def prediction_loss(teacher_logits: np.ndarray, student_logits: Tensor,
                    cfg: KdConfig) -> Tensor:
    """Soft cross-entropy, summed over the batch."""
    if student_logits.shape != teacher_logits.shape:
        raise ShapeError(
            f"logit shapes disagree: student {student_logits.shape} "
            f"vs teacher {teacher_logits.shape}"
        )
    t = teacher_logits / cfg.temperature if cfg.symmetric_temperature else teacher_logits
    t_probs = _stable_softmax(t)
    s_log = T.log_softmax(T.scale(student_logits, 1.0 / cfg.temperature), axis=-1)
    return T.scale(T.sum_(T.mul(Tensor(t_probs), s_log)), -1.0)


def layer_loss(i: int, teacher: ForwardTrace, student: ForwardTrace,
               cfg: KdConfig) -> Tensor:
    """Distillation loss of layer pair i (1-based; N+1 is the output layer)."""
    n = len(teacher.hidden)
    if not 1 <= i <= n + 1:
        raise ContractError(f"layer index {i} outside 1..{n + 1}")
    if i == n + 1:
        return prediction_loss(teacher.logits.data, student.logits, cfg)
    hid = _batch_sum_mse(student.hidden[i - 1], teacher.hidden[i - 1].data)
    if cfg.match_attention_scores:
        att = _batch_sum_mse(student.scores[i - 1], teacher.scores[i - 1].data)
    else:
        att = _batch_sum_mse(student.attn[i - 1], teacher.attn[i - 1].data)
    return T.add(hid, att)


def total_loss(teacher: ForwardTrace, student: ForwardTrace,
               cfg: KdConfig) -> Tensor:
    """Coefficient-weighted sum of all layer losses (batch-summed)."""
    n = len(teacher.hidden)
    if len(student.hidden) != n:
        raise ContractError(
            f"traces disagree on depth: teacher {n}, student {len(student.hidden)}"
        )
    if len(cfg.layer_weights) != n + 1:
        raise ConfigError(
            f"need {n + 1} layer weights for {n} encoder layers, "
            f"got {len(cfg.layer_weights)}"
        )
    acc = None
    for i, w in enumerate(cfg.layer_weights, start=1):
        if w == 0.0:
            continue
        term = T.scale(layer_loss(i, teacher, student, cfg), float(w))
        acc = term if acc is None else T.add(acc, term)
    return acc if acc is not None else Tensor(0.0)


def loss_components(teacher: ForwardTrace, student: ForwardTrace,
                    cfg: KdConfig):
    """total_loss split for logging: returns (loss Tensor, parts dict)
    with coefficient-weighted hidden / attention / prediction sums."""
    n = len(teacher.hidden)
    if len(cfg.layer_weights) != n + 1:
        raise ConfigError(
            f"need {n + 1} layer weights for {n} encoder layers, "
            f"got {len(cfg.layer_weights)}"
        )
    terms = []
    parts = {"hidden": 0.0, "attention": 0.0, "prediction": 0.0}
    for i in range(1, n + 1):
        w = cfg.layer_weights[i - 1]
        if w == 0.0:
            continue
        hid = T.scale(_batch_sum_mse(student.hidden[i - 1],
                                     teacher.hidden[i - 1].data), float(w))
        if cfg.match_attention_scores:
            att = T.scale(_batch_sum_mse(student.scores[i - 1],
                                         teacher.scores[i - 1].data), float(w))
        else:
            att = T.scale(_batch_sum_mse(student.attn[i - 1],
                                         teacher.attn[i - 1].data), float(w))
        parts["hidden"] += hid.item()
        parts["attention"] += att.item()
        terms.extend((hid, att))
    w_pred = cfg.layer_weights[n]
    if w_pred != 0.0:
        pred = T.scale(prediction_loss(teacher.logits.data, student.logits, cfg),
                       float(w_pred))
        parts["prediction"] = pred.item()
        terms.append(pred)
    if not terms:
        return Tensor(0.0), parts
    acc = terms[0]
    for term in terms[1:]:
        acc = T.add(acc, term)
    return acc, parts


def cross_entropy(logits: Tensor, labels: np.ndarray,
                  reduction: str = "mean") -> Tensor:
    """Hard-label cross-entropy used for teacher finetuning and the
    no-distillation ablations."""
    labels = np.asarray(labels, dtype=np.int64)
    b, c = logits.shape
    if labels.shape != (b,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {b}")
    onehot = np.zeros((b, c))
    onehot[np.arange(b), labels] = 1.0
    picked = T.sum_(T.mul(Tensor(onehot), T.log_softmax(logits, axis=-1)))
    if reduction == "mean":
        return T.scale(picked, -1.0 / b)
    if reduction == "sum":
        return T.scale(picked, -1.0)
    raise ContractError(f"unknown reduction {reduction!r}")
