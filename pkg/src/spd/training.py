"""End-to-end training: dense teacher finetuning and the three-phase
sparse-progressive-distillation loop.

Phase layout over steps t in [0, t3):

* t <  t1: ramp-prune the student modules each step, graft with p0;
* t <  t2: hold the masks, graft with p = slope * (t - t1) + p0;
* t >= t3 boundary: graft probability pinned at 1 (all-student model).

Every step draws one graft mask, computes the loss on the composed
model, updates only the grafted student modules plus the classifier
head, re-applies the sparsity masks (weights and optimizer moments), and
prunes again while in phase 1.  The student bank is the single source of
truth: grafted layers are the bank's own objects, so updates land in the
bank directly.

Random streams (all derived from RunConfig.seed): 1 = weight init,
2 = teacher batch order, 3 = distillation batch order, 4 = graft draws.
The four strategies consume streams identically, so runs with the same
seed differ only through arithmetic, never through draw order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from ._kernels import BACKEND
from .checkpoint import save_model
from .data import Dataset, epoch_batches, gen_pair_match, gen_parity
from .distill import KdConfig, cross_entropy, loss_components
from .errors import ConfigError, ContractError, NumericError
from .grafting import GraftSchedule, compose_grafted, draw_mask, probability_at
from .metrics import evaluate_metric
from .model import EncoderModel, ModelConfig, clone_model
from .optim import AdamW, LrSchedule
from .pruning import SparsitySchedule, prune_layer, step_sparsity
from .rng import Rng

INIT_STREAM = 1
TEACHER_DATA_STREAM = 2
SPD_DATA_STREAM = 3
GRAFT_STREAM = 4

STRATEGIES = ("prog_kd", "no_prog_kd", "prog_no_kd", "no_prog_no_kd")


@dataclass(frozen=True)
class TaskConfig:
    """Recipe for building a dataset (generator family + sizes).

    subsample_train shrinks the training split seen by distillation and
    finetuning runs (the relative-data-deficiency regime); teacher
    finetuning always uses the full split, standing in for a teacher
    trained with adequate data.
    """

    name: str = "parity"
    n_train: int = 2048
    n_dev: int = 512
    seq_len: int = 12            # parity sequence length
    seg_len: int = 5             # pair-match segment length
    vocab: int = 12              # pair-match content vocabulary
    pair_negatives: str = "substitute"
    data_seed: int = 1
    subsample_train: int | None = None   # small-data regime

    def build(self) -> Dataset:
        """Full dataset (teacher view)."""
        if self.name == "parity":
            return gen_parity(self.n_train, self.n_dev, self.seq_len,
                              self.data_seed)
        if self.name == "pair_match":
            return gen_pair_match(self.n_train, self.n_dev, self.vocab,
                                  self.data_seed, seg_len=self.seg_len,
                                  negatives=self.pair_negatives)
        raise ConfigError(f"unknown task {self.name!r}")

    def build_for_distillation(self) -> Dataset:
        """Student view: the training split cut to subsample_train."""
        ds = self.build()
        if self.subsample_train is not None:
            if self.subsample_train > len(ds.train):
                raise ConfigError("subsample larger than the training split")
            ds.train = ds.train.subset(np.arange(self.subsample_train))
        return ds


@dataclass(frozen=True)
class TeacherConfig:
    steps: int = 3000
    peak_lr: float = 1e-3
    warmup_frac: float = 0.06
    weight_decay: float = 0.01
    batch_size: int = 32
    eval_every: int = 100


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    seed: int = 0
    teacher_seed: int = 100   # teacher training is seeded separately so
    strategy: str = "prog_kd"  # one teacher can back a multi-seed sweep

    # phase boundaries in steps
    t1: int = 600
    t2: int = 1000
    t3: int = 1200

    # pruning
    target_sparsity: float = 0.5
    ramp_mode: str = "cubic"

    # grafting
    p0: float = 0.6
    graft_while_prune: bool = True   # False reproduces the no-graft ablation

    # distillation
    kd_temperature: float = 1.0
    kd_layer_weights: tuple | None = None   # None -> all ones
    symmetric_temperature: bool = False
    match_attention_scores: bool = False
    label_loss_weight: float = 0.0          # optional ground-truth CE term

    # optimization
    peak_lr: float = 5e-4
    finetune_peak_lr: float | None = None
    warmup_frac: float = 0.06
    weight_decay: float = 0.01
    grad_clip: float | None = None
    two_optimizers: bool = True
    batch_size: int = 32

    # evaluation
    eval_every: int = 50
    eval_train_size: int = 256

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if not self.t1 < self.t2 <= self.t3:
            raise ConfigError(
                f"phases must satisfy t1 < t2 <= t3, got {self.t1}, {self.t2}, {self.t3}"
            )

    def kd_config(self) -> KdConfig:
        weights = (self.kd_layer_weights
                   if self.kd_layer_weights is not None
                   else (1.0,) * (self.model.num_layers + 1))
        return KdConfig(layer_weights=tuple(weights),
                        temperature=self.kd_temperature,
                        symmetric_temperature=self.symmetric_temperature,
                        match_attention_scores=self.match_attention_scores)

    @property
    def uses_kd(self) -> bool:
        return self.strategy in ("prog_kd", "no_prog_kd")

    @property
    def progressive(self) -> bool:
        return self.strategy in ("prog_kd", "prog_no_kd")


# -- metric log ------------------------------------------------------------


class MetricLog:
    """Append-only per-eval-step records, serialized as CSV with a fixed
    column order and repr-formatted floats (byte-reproducible)."""

    def __init__(self, num_layers: int):
        self.num_layers = num_layers
        self.columns = (
            ["step", "phase", "p", "graft_rate", "lr", "loss",
             "kd_hidden", "kd_attn", "kd_pred", "train_metric", "dev_metric"]
            + [f"sparsity_{i}" for i in range(num_layers)]
        )
        self.rows: list[dict] = []

    def append(self, **fields):
        if self.rows and fields["step"] <= self.rows[-1]["step"]:
            raise ContractError("metric rows must be strictly ordered by step")
        self.rows.append(fields)

    def to_csv(self) -> str:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(fmt(row.get(c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_csv())

    def last(self, column):
        return self.rows[-1][column] if self.rows else None

    def series(self, column):
        return [row.get(column) for row in self.rows]


# -- evaluation -------------------------------------------------------------


def predict(model, split, batch_size: int = 128):
    """Class predictions and decision scores over a split, in order."""
    preds, scores = [], []
    with T.no_grad():
        for batch in epoch_batches(split, batch_size, rng=None):
            logits = model.forward(batch.token_ids, segment_ids=batch.segment_ids,
                                   lengths=batch.lengths).logits.data
            preds.append(np.argmax(logits, axis=-1))
            scores.append(logits[:, -1] - logits[:, 0])
    return np.concatenate(preds), np.concatenate(scores)


def evaluate(model, split, metric: str, batch_size: int = 128) -> float:
    if len(split) == 0:
        raise ContractError("cannot evaluate an empty split")
    preds, scores = predict(model, split, batch_size)
    return evaluate_metric(metric, preds, split.labels, scores=scores)


def _forever_batches(split, batch_size, rng):
    while True:
        yield from epoch_batches(split, batch_size, rng)


def realized_layer_sparsity(model: EncoderModel) -> list:
    """Fraction of exactly-zero entries over each layer's prunable set."""
    out = []
    for layer in model.layers:
        zeros = total = 0
        for _, tensor in layer.prunable():
            zeros += int(np.count_nonzero(tensor.data == 0.0))
            total += tensor.data.size
        out.append(zeros / total)
    return out


# -- teacher ----------------------------------------------------------------


def train_teacher(cfg: RunConfig, dataset: Dataset | None = None):
    """Dense finetuning with plain cross-entropy; returns (model, log)."""
    ds = dataset if dataset is not None else cfg.task.build()
    tc = cfg.teacher
    model = EncoderModel(cfg.model, Rng(cfg.teacher_seed, INIT_STREAM))
    params = [(n, p) for n, p in model.named_params()]
    opt = AdamW(params, LrSchedule.from_span(tc.peak_lr, tc.steps, tc.warmup_frac),
                weight_decay=tc.weight_decay)
    batches = _forever_batches(ds.train, tc.batch_size,
                               Rng(cfg.teacher_seed, TEACHER_DATA_STREAM))
    log = MetricLog(cfg.model.num_layers)
    train_eval = ds.train.subset(np.arange(min(len(ds.train), cfg.eval_train_size)))

    for t in range(tc.steps):
        batch = next(batches)
        trace = model.forward(batch.token_ids, segment_ids=batch.segment_ids,
                              lengths=batch.lengths)
        loss = cross_entropy(trace.logits, batch.labels)
        loss_val = loss.item()
        if not np.isfinite(loss_val):
            raise NumericError(f"teacher training diverged at step {t}")
        T.backward(loss)
        opt.step()
        opt.zero_grads()
        T.reset_tape()

        if (t + 1) % tc.eval_every == 0 or t + 1 == tc.steps:
            log.append(
                step=t + 1, phase=0, p=None, graft_rate=None, lr=opt.last_lr,
                loss=loss_val, kd_hidden=None, kd_attn=None, kd_pred=None,
                train_metric=evaluate(model, train_eval, ds.spec.metric),
                dev_metric=evaluate(model, ds.dev, ds.spec.metric),
                **{f"sparsity_{i}": 0.0 for i in range(cfg.model.num_layers)},
            )
    return model, log


# -- sparse progressive distillation ----------------------------------------


@dataclass
class RunResult:
    student: EncoderModel
    log: MetricLog
    summary: dict


def run_spd(cfg: RunConfig, teacher: EncoderModel,
            dataset: Dataset | None = None, out_dir=None,
            step_callback=None) -> RunResult:
    """Execute the three-phase loop and return the all-student model.

    With out_dir set, metrics.csv / summary.json / student.spd are
    written there, and a last-good checkpoint is saved if a step
    produces a non-finite loss.  `step_callback(t, student, masks,
    graft_mask)` runs after each completed step (used by invariant
    checks; it must not mutate anything).
    """
    ds = dataset if dataset is not None else cfg.task.build_for_distillation()
    if teacher.cfg != cfg.model:
        raise ConfigError("teacher architecture does not match run config")
    n_layers = cfg.model.num_layers

    teacher.set_trainable(False)
    student = clone_model(teacher)
    student.set_trainable(True)
    for p in student.embedding_params():
        p.requires_grad = False

    trainable = [(n, p) for n, p in student.named_params() if p.requires_grad]
    head_names = {"cls_w", "cls_b"}
    layer_param_names = [
        {f"layers.{i}.{n}" for n, _ in layer.named_params()}
        for i, layer in enumerate(student.layers)
    ]

    graft_sched = GraftSchedule(p0=cfg.p0, t1=cfg.t1, t2=cfg.t2, t3=cfg.t3)
    sparsity_sched = SparsitySchedule(target=cfg.target_sparsity, t1=cfg.t1,
                                      mode=cfg.ramp_mode)
    kd_cfg = cfg.kd_config()

    fine_lr = cfg.finetune_peak_lr if cfg.finetune_peak_lr is not None else cfg.peak_lr
    if cfg.two_optimizers:
        opt_main = AdamW(trainable,
                         LrSchedule.from_span(cfg.peak_lr, cfg.t2, cfg.warmup_frac),
                         weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip)
        opt_fine = AdamW(trainable,
                         LrSchedule.from_span(fine_lr, cfg.t3 - cfg.t2,
                                              cfg.warmup_frac),
                         weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip)
    else:
        opt_main = AdamW(trainable,
                         LrSchedule.from_span(cfg.peak_lr, cfg.t3, cfg.warmup_frac),
                         weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip)
        opt_fine = opt_main

    rng_graft = Rng(cfg.seed, GRAFT_STREAM)
    batches = _forever_batches(ds.train, cfg.batch_size,
                               Rng(cfg.seed, SPD_DATA_STREAM))
    log = MetricLog(n_layers)
    train_eval = ds.train.subset(np.arange(min(len(ds.train), cfg.eval_train_size)))
    masks: dict = {}
    teacher_forwards = 0
    last_good = None

    def prune_student(theta: float, opt: AdamW):
        for i, layer in enumerate(student.layers):
            for name, sm in prune_layer(layer, i, theta).items():
                key = f"layers.{i}.{name}"
                masks[key] = sm.mask
                opt.m[key] *= sm.mask
                opt.v[key] *= sm.mask

    try:
        for t in range(cfg.t3):
            phase = 1 if t < cfg.t1 else (2 if t < cfg.t2 else 3)
            opt = opt_fine if (cfg.two_optimizers and t >= cfg.t2) else opt_main

            if cfg.progressive:
                p = probability_at(graft_sched, t)
                if phase == 1 and not cfg.graft_while_prune:
                    p = 0.0
            else:
                p = 1.0
            gmask = draw_mask(p, rng_graft, n_layers)

            batch = next(batches)
            grafted = compose_grafted(teacher, student, gmask)
            if cfg.uses_kd:
                with T.no_grad():
                    t_trace = teacher.forward(batch.token_ids,
                                              segment_ids=batch.segment_ids,
                                              lengths=batch.lengths)
                teacher_forwards += 1
                s_trace = grafted.forward(batch.token_ids,
                                          segment_ids=batch.segment_ids,
                                          lengths=batch.lengths)
                loss, parts = loss_components(t_trace, s_trace, kd_cfg)
                if cfg.label_loss_weight > 0.0:
                    loss = T.add(loss, T.scale(
                        cross_entropy(s_trace.logits, batch.labels),
                        cfg.label_loss_weight))
            else:
                s_trace = grafted.forward(batch.token_ids,
                                          segment_ids=batch.segment_ids,
                                          lengths=batch.lengths)
                loss = cross_entropy(s_trace.logits, batch.labels)
                parts = {"hidden": 0.0, "attention": 0.0, "prediction": 0.0}

            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise NumericError(f"non-finite loss at step {t} (phase {phase})")

            T.backward(loss)
            active = set(head_names)
            for i, bit in enumerate(gmask.bits):
                if bit:
                    active |= layer_param_names[i]
            opt.step(active=active, masks=masks)
            opt.zero_grads()
            T.reset_tape()

            if phase == 1:
                # ramp evaluated at t+1 so the target is met when the
                # pruning phase ends
                prune_student(step_sparsity(sparsity_sched, t + 1), opt)

            if step_callback is not None:
                step_callback(t, student, masks, gmask)

            if (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.t3:
                spars = realized_layer_sparsity(student)
                log.append(
                    step=t + 1, phase=phase, p=p, graft_rate=gmask.rate,
                    lr=opt.last_lr, loss=loss_val,
                    kd_hidden=parts["hidden"], kd_attn=parts["attention"],
                    kd_pred=parts["prediction"],
                    train_metric=evaluate(student, train_eval, ds.spec.metric),
                    dev_metric=evaluate(student, ds.dev, ds.spec.metric),
                    **{f"sparsity_{i}": spars[i] for i in range(n_layers)},
                )
                last_good = {n: p_.data.copy() for n, p_ in student.named_params()}
    except NumericError:
        if out_dir is not None and last_good is not None:
            for (n, p_) in student.named_params():
                p_.data = last_good[n]
            save_model(_join(out_dir, "last_good.spd"), student,
                       extra_meta={"note": "state at last completed eval"})
        raise

    summary = {
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "backend": BACKEND,
        "teacher_forward_count": teacher_forwards,
        "final_sparsity": realized_layer_sparsity(student),
        "final_train_metric": log.last("train_metric"),
        "final_dev_metric": log.last("dev_metric"),
        "metric": ds.spec.metric,
    }
    if out_dir is not None:
        log.save(_join(out_dir, "metrics.csv"))
        save_model(_join(out_dir, "student.spd"), student,
                   extra_meta={"seed": cfg.seed, "strategy": cfg.strategy},
                   masks=masks)
        with open(_join(out_dir, "summary.json"), "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
    return RunResult(student=student, log=log, summary=summary)


def _join(out_dir, name):
    import os

    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(str(out_dir), name)


def strategy_variant(cfg: RunConfig, strategy: str) -> RunConfig:
    """Same run, different strategy knob."""
    return replace(cfg, strategy=strategy)
