"""Experiment presets: named multi-run protocols with aggregated reports.

Each preset expands to (variant, seed) member runs sharing one teacher.
run_preset executes them sequentially, writes per-run metrics.csv +
summary.json, aggregates mean/std across seeds per variant, and renders
deterministic SVG charts.  A failing member run is recorded in
failures.json without discarding completed ones.
"""

from __future__ import annotations

import json
import os
import traceback
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .model import ModelConfig
from .report import render_curves, save_svg
from .subsetsum import delta_sweep, sweep_csv
from .training import RunConfig, TaskConfig, TeacherConfig, run_spd, train_teacher

PRESET_NAMES = (
    "gap_vs_sparsity", "four_strategies", "graft_vs_nograft", "p0_sweep",
    "prune_end_sweep", "one_vs_two_optimizers", "lr_sweep", "bound_sweep",
)

# §-free protocol notes carried into summary metadata
_PROTOCOLS = {
    "gap_vs_sparsity": "train-dev gap growth as target sparsity rises",
    "four_strategies": "overfitting gap across progressive/distillation strategies",
    "graft_vs_nograft": "grafting during the pruning phase vs none",
    "p0_sweep": "sensitivity to the initial grafting probability",
    "prune_end_sweep": "sensitivity to the pruning end step",
    "one_vs_two_optimizers": "single triangular schedule vs two independent ones",
    "lr_sweep": "sensitivity to the peak learning rate",
    "bound_sweep": "subset-sum failure rate delta vs pool size",
}


@dataclass
class ExperimentPreset:
    name: str
    protocol: str
    variants: list           # (variant_name, RunConfig) pairs
    seeds: tuple
    sweep_values: dict | None = None   # variant_name -> x value for sweep charts


def small_data_base(**overrides) -> RunConfig:
    """Sentence-pair matching in the relative-data-deficiency regime: the
    teacher trains on the full 2048-example split, distillation runs see
    only a 400-example subsample, so the sparse student has room to
    overfit."""
    defaults = dict(
        model=ModelConfig(num_layers=4, d_model=48, num_heads=4, d_ff=96,
                          vocab_size=16, max_seq_len=11, num_classes=2),
        task=TaskConfig(name="pair_match", n_train=2048, n_dev=512,
                        seg_len=5, vocab=12, pair_negatives="resample",
                        data_seed=7, subsample_train=400),
        teacher=TeacherConfig(steps=1200, peak_lr=1e-3, batch_size=32,
                              eval_every=200),
        t1=375, t2=625, t3=750,
        target_sparsity=0.8,
        p0=0.6,
        peak_lr=7e-4,
        batch_size=32,
        eval_every=75,
        eval_train_size=256,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def parity_base(**overrides) -> RunConfig:
    """Mixed-length parity sized so a strong teacher emerges within the
    3000-step budget (the reference recipe, verified by the golden log)."""
    defaults = dict(
        model=ModelConfig(num_layers=4, d_model=64, num_heads=4, d_ff=128,
                          vocab_size=8, max_seq_len=7, num_classes=2),
        task=TaskConfig(name="parity", n_train=204, n_dev=50, seq_len=7,
                        data_seed=3),
        teacher=TeacherConfig(steps=3000, peak_lr=1.5e-3, batch_size=64,
                              eval_every=250, weight_decay=0.02),
        t1=600, t2=1000, t3=1200,
        target_sparsity=0.5,
        p0=0.6,
        peak_lr=6.4e-4,
        batch_size=32,
        eval_every=100,
        eval_train_size=204,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def build_preset(name: str, seeds=None, base: RunConfig | None = None) -> ExperimentPreset:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    if seeds is not None and len(seeds) == 0:
        raise ConfigError("preset needs at least one seed")
    protocol = _PROTOCOLS[name]
    sweep_values = None

    if name == "bound_sweep":
        return ExperimentPreset(name=name, protocol=protocol, variants=[],
                                seeds=tuple(seeds or (0,)))

    if name == "gap_vs_sparsity":
        seeds = tuple(seeds or range(3))
        cfg = base or small_data_base()
        variants = [(f"sparsity_{theta}", replace(cfg, target_sparsity=theta))
                    for theta in (0.0, 0.8, 0.95)]
        sweep_values = {f"sparsity_{t}": t for t in (0.0, 0.8, 0.95)}
    elif name == "four_strategies":
        seeds = tuple(seeds or range(5))
        cfg = base or small_data_base()
        variants = [(s, replace(cfg, strategy=s))
                    for s in ("no_prog_no_kd", "prog_no_kd", "no_prog_kd",
                              "prog_kd")]
    elif name == "graft_vs_nograft":
        seeds = tuple(seeds or range(3))
        cfg = base or small_data_base()
        variants = [("graft_while_prune", cfg),
                    ("no_graft_while_prune", replace(cfg, graft_while_prune=False))]
    elif name == "p0_sweep":
        seeds = tuple(seeds or range(3))
        cfg = base or small_data_base()
        values = [round(0.1 * k, 1) for k in range(1, 10)]
        variants = [(f"p0_{v}", replace(cfg, p0=v)) for v in values]
        sweep_values = {f"p0_{v}": v for v in values}
    elif name == "prune_end_sweep":
        seeds = tuple(seeds or range(3))
        cfg = base or small_data_base()
        ends = {"early": max(1, cfg.t2 // 4), "mid": cfg.t2 // 2,
                "late": (3 * cfg.t2) // 4}
        variants = [(f"prune_end_{k}", replace(cfg, t1=v))
                    for k, v in ends.items()]
        sweep_values = {f"prune_end_{k}": float(v) for k, v in ends.items()}
    elif name == "one_vs_two_optimizers":
        seeds = tuple(seeds or range(3))
        cfg = base or small_data_base()
        variants = [("two_optimizers", cfg),
                    ("one_optimizer", replace(cfg, two_optimizers=False))]
    elif name == "lr_sweep":
        seeds = tuple(seeds or range(3))
        cfg = base or small_data_base()
        values = (3e-5, 1e-4, 3.2e-4, 5e-4, 6.4e-4)
        variants = [(f"lr_{v}", replace(cfg, peak_lr=v)) for v in values]
        sweep_values = {f"lr_{v}": v for v in values}

    return ExperimentPreset(name=name, protocol=protocol, variants=variants,
                            seeds=seeds, sweep_values=sweep_values)


# -- execution ---------------------------------------------------------------


def _stats(values):
    arr = np.array(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "values": [float(v) for v in values]}


def run_bound_sweep(out_dir, ns=(4, 8, 12, 16, 20), epsilon=0.05,
                    trials=500, seed=0, grid_step=0.01) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    reports = delta_sweep(ns, epsilon, trials, seed, grid_step)
    with open(os.path.join(out_dir, "bound_sweep.csv"), "w", encoding="utf-8") as f:
        f.write(sweep_csv(reports))
    summary = {
        "preset": "bound_sweep",
        "protocol": _PROTOCOLS["bound_sweep"],
        "epsilon": epsilon,
        "trials": trials,
        "seed": seed,
        "reports": [r.to_dict() for r in reports],
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    svg = render_curves(
        [("delta_hat", [r.n for r in reports], [r.delta_hat for r in reports])],
        title=f"failure rate vs pool size (eps={epsilon})",
        x_label="n", y_label="delta_hat")
    save_svg(os.path.join(out_dir, "bound_sweep.svg"), svg)
    return summary


def run_preset(preset: ExperimentPreset, out_dir, progress=None) -> dict:
    """Execute all member runs; returns the aggregate summary dict."""
    if preset.name == "bound_sweep":
        return run_bound_sweep(out_dir, seed=preset.seeds[0])

    os.makedirs(out_dir, exist_ok=True)
    say = progress or (lambda msg: None)
    teachers: dict = {}
    failures = []
    results: dict = {}

    for variant, cfg in preset.variants:
        results[variant] = {}
        for seed in preset.seeds:
            run_cfg = replace(cfg, seed=seed)
            key = (id(cfg.model), cfg.task, cfg.teacher, cfg.teacher_seed)
            run_dir = os.path.join(out_dir, variant, f"seed_{seed}")
            say(f"run {preset.name}/{variant}/seed_{seed}")
            try:
                if key not in teachers:
                    teachers[key], _ = train_teacher(run_cfg)
                result = run_spd(run_cfg, teachers[key], out_dir=run_dir)
                results[variant][seed] = result
            except Exception as exc:  # partial failure: keep going
                failures.append({
                    "variant": variant, "seed": seed,
                    "error": f"{type(exc).__name__}: {exc}",
                    "trace": traceback.format_exc(),
                })

    summary = {"preset": preset.name, "protocol": preset.protocol,
               "seeds": list(preset.seeds), "variants": {}}
    for variant, by_seed in results.items():
        if not by_seed:
            continue
        train_m = [r.summary["final_train_metric"] for r in by_seed.values()]
        dev_m = [r.summary["final_dev_metric"] for r in by_seed.values()]
        gaps = [t - d for t, d in zip(train_m, dev_m)]
        summary["variants"][variant] = {
            "seeds": sorted(by_seed),
            "final_train_metric": _stats(train_m),
            "final_dev_metric": _stats(dev_m),
            "final_gap": _stats(gaps),
        }

    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    if failures:
        with open(os.path.join(out_dir, "failures.json"), "w", encoding="utf-8") as f:
            json.dump(failures, f, indent=2, sort_keys=True)
            f.write("\n")

    _render_preset_charts(preset, results, summary, out_dir)
    return summary


def _render_preset_charts(preset, results, summary, out_dir):
    for variant, by_seed in results.items():
        if not by_seed:
            continue
        first = by_seed[sorted(by_seed)[0]]
        steps = first.log.series("step")
        svg = render_curves(
            [("train", steps, first.log.series("train_metric")),
             ("dev", steps, first.log.series("dev_metric"))],
            title=f"{preset.name}: {variant}",
            x_label="step", y_label="metric")
        save_svg(os.path.join(out_dir, f"curves_{variant}.svg"), svg)

    if preset.sweep_values:
        xs, ys = [], []
        for variant, x in preset.sweep_values.items():
            stats = summary["variants"].get(variant)
            if stats:
                xs.append(x)
                ys.append(stats["final_dev_metric"]["mean"])
        if xs:
            svg = render_curves([("dev_metric", xs, ys)],
                                title=f"{preset.name}: final dev metric",
                                x_label=preset.name, y_label="dev metric")
            save_svg(os.path.join(out_dir, "sweep.svg"), svg)
