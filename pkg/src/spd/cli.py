"""Command-line front end.

Subcommands: train-teacher, spd-run, ablate-strategies, sweep,
run-preset, verify-bound, config-template.  Exit codes: 0 success,
2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .checkpoint import load_model, save_model
from .config import config_template, load_run_config
from .errors import ConfigError, NumericError, SpdError
from .presets import PRESET_NAMES, build_preset, run_bound_sweep, run_preset
from .subsetsum import failure_rate
from .training import RunConfig, run_spd, train_teacher

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_cfg(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "strategy", None):
        updates["strategy"] = args.strategy
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _ensure_out(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_train_teacher(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args.out)
    model, log = train_teacher(cfg)
    save_model(os.path.join(out, "teacher.spd"), model,
               extra_meta={"teacher_seed": cfg.teacher_seed})
    log.save(os.path.join(out, "teacher_metrics.csv"))
    print(f"teacher dev metric: {log.last('dev_metric')}")
    print(f"saved {os.path.join(out, 'teacher.spd')}")
    return EXIT_OK


def cmd_spd_run(args) -> int:
    cfg = _load_cfg(args)
    out = _ensure_out(args.out)
    if args.teacher:
        teacher, _, _ = load_model(args.teacher)
        if teacher.cfg != cfg.model:
            raise ConfigError("teacher checkpoint architecture does not match config")
    else:
        teacher, _ = train_teacher(cfg)
        save_model(os.path.join(out, "teacher.spd"), teacher,
                   extra_meta={"teacher_seed": cfg.teacher_seed})
    result = run_spd(cfg, teacher, out_dir=out)
    print(f"final dev metric: {result.summary['final_dev_metric']}")
    print(f"final sparsity: {result.summary['final_sparsity']}")
    return EXIT_OK


def cmd_ablate_strategies(args) -> int:
    base = load_run_config(args.config) if args.config else None
    seeds = args.seeds if args.seeds else None
    preset = build_preset("four_strategies", seeds=seeds, base=base)
    summary = run_preset(preset, _ensure_out(args.out),
                         progress=lambda m: print(m, flush=True))
    for variant, stats in summary["variants"].items():
        gap = stats["final_gap"]
        print(f"{variant}: gap {gap['mean']:.4f} +- {gap['std']:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = load_run_config(args.config) if args.config else None
    name = {"p0": "p0_sweep", "lr": "lr_sweep",
            "sparsity": "gap_vs_sparsity"}[args.grid]
    preset = build_preset(name, seeds=args.seeds or None, base=base)
    run_preset(preset, _ensure_out(args.out),
               progress=lambda m: print(m, flush=True))
    print(f"wrote {os.path.join(args.out, 'summary.json')}")
    return EXIT_OK


def cmd_run_preset(args) -> int:
    base = load_run_config(args.config) if args.config else None
    preset = build_preset(args.name, seeds=args.seeds or None, base=base)
    run_preset(preset, _ensure_out(args.out),
               progress=lambda m: print(m, flush=True))
    print(f"wrote {os.path.join(args.out, 'summary.json')}")
    return EXIT_OK


def cmd_verify_bound(args) -> int:
    out = _ensure_out(args.out)
    if len(args.n) == 1:
        report = failure_rate(args.n[0], args.eps, args.trials, args.seed,
                              grid_step=args.grid_step)
        path = os.path.join(out, "bound_report.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(report.to_json())
        print(f"n={report.n} eps={report.epsilon} delta_hat={report.delta_hat}")
        print(f"wrote {path}")
    else:
        run_bound_sweep(out, ns=tuple(args.n), epsilon=args.eps,
                        trials=args.trials, seed=args.seed,
                        grid_step=args.grid_step)
        print(f"wrote {os.path.join(out, 'bound_sweep.csv')}")
    return EXIT_OK


def cmd_config_template(args) -> int:
    print(json.dumps(config_template(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spd",
        description="Sparse progressive distillation for small transformer "
                    "encoders, plus a subset-sum approximation lab.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=False):
        p.add_argument("--config", default=None, help="JSON run config")
        p.add_argument("--out", default="runs/out", help="output directory")
        if seeds:
            p.add_argument("--seeds", type=int, nargs="*", default=None)
        else:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train-teacher", help="finetune the dense teacher")
    common(p)
    p.set_defaults(fn=cmd_train_teacher)

    p = sub.add_parser("spd-run", help="three-phase sparse distillation run")
    common(p)
    p.add_argument("--teacher", default=None, help="teacher checkpoint (.spd)")
    p.add_argument("--strategy", default=None,
                   choices=["prog_kd", "no_prog_kd", "prog_no_kd", "no_prog_no_kd"])
    p.set_defaults(fn=cmd_spd_run)

    p = sub.add_parser("ablate-strategies",
                       help="compare the four overfitting strategies")
    common(p, seeds=True)
    p.set_defaults(fn=cmd_ablate_strategies)

    p = sub.add_parser("sweep", help="grid over p0, lr, or sparsity")
    common(p, seeds=True)
    p.add_argument("--grid", required=True, choices=["p0", "lr", "sparsity"])
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("run-preset", help="run a named experiment preset")
    common(p, seeds=True)
    p.add_argument("--name", required=True, choices=list(PRESET_NAMES))
    p.set_defaults(fn=cmd_run_preset)

    p = sub.add_parser("verify-bound",
                       help="estimate the subset-sum failure rate")
    p.add_argument("--n", type=int, nargs="+", required=True,
                   help="pool size(s); several values produce a sweep CSV")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--out", default="runs/bound")
    p.set_defaults(fn=cmd_verify_bound)

    p = sub.add_parser("config-template",
                       help="print a complete config with defaults")
    p.set_defaults(fn=cmd_config_template)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
