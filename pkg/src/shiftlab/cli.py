"""Command-line experiment runner.

Verbs: generate, stage1, extract, stage2, bound (stepwise, per trial seed),
run (full pipeline), sweep (ablations over one stage-2 axis), and curves
(merge report CSVs for plotting).  Stepwise verbs regenerate the synthetic
domains from the config (generation is pure, so this matches the files that
``generate`` writes bit for bit) and read their other inputs from --out.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import ExperimentConfig, build_experiment_config, load_experiment_config, probe_spec_for, trial_seeds
from .datasets import UnlabeledDomain, generate_pair, load_domain, save_domain
from .evaluation import bound_report, make_eval_hook
from .experiment import emit_curves, run_experiment, run_sweep, trial_shift
from .losses import SoftLabels
from .mlp import load_checkpoint, save_checkpoint
from .training import extract_soft_labels, train_stage1, train_stage2


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_experiment_config(args.config)
    else:
        cfg = build_experiment_config({}, "<defaults>")
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    return cfg


def _seed_dir(cfg: ExperimentConfig, seed: int) -> str:
    path = os.path.join(cfg.output_dir, f"seed_{seed}")
    os.makedirs(path, exist_ok=True)
    return path


def _require(path: str, hint: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing {path}; run '{hint}' first")
    return path


def cmd_generate(cfg: ExperimentConfig) -> None:
    for seed in cfg.seeds:
        out = _seed_dir(cfg, seed)
        source, target = generate_pair(trial_shift(cfg, seed))
        save_domain(source, os.path.join(out, "source.txt"))
        save_domain(target, os.path.join(out, "target.txt"))
        print(f"seed {seed}: wrote {len(source)} source and {len(target)} target rows")


def cmd_stage1(cfg: ExperimentConfig) -> None:
    for seed in cfg.seeds:
        out = _seed_dir(cfg, seed)
        seeds = trial_seeds(cfg, seed)
        source, target = generate_pair(trial_shift(cfg, seed))
        s1_cfg = replace(
            cfg.stage1,
            model_spec=replace(cfg.stage1.model_spec, init_seed=seeds.stage1_init),
            seed=seeds.stage1_train,
        )
        model, report = train_stage1(source, target, s1_cfg, eval_hook=make_eval_hook(source, target))
        save_checkpoint(model, os.path.join(out, "stage1.ckpt"))
        report.checkpoint_path = "stage1.ckpt"
        report.write_csv(os.path.join(out, "stage1_report.csv"))
        rec = report.records[-1]
        print(f"seed {seed}: stage1 source_acc={rec.source_acc:.4f} target_acc={rec.target_acc:.4f}")


def cmd_extract(cfg: ExperimentConfig) -> None:
    for seed in cfg.seeds:
        out = _seed_dir(cfg, seed)
        _, target = generate_pair(trial_shift(cfg, seed))
        teacher = load_checkpoint(_require(os.path.join(out, "stage1.ckpt"), "stage1"))
        soft = extract_soft_labels(teacher, target, cfg.stage2.temperature)
        save_domain(
            UnlabeledDomain(soft.probs, target.num_classes, name="soft_labels"),
            os.path.join(out, "soft_labels.txt"),
        )
        print(f"seed {seed}: wrote soft labels for {len(soft)} target rows")


def cmd_stage2(cfg: ExperimentConfig) -> None:
    for seed in cfg.seeds:
        out = _seed_dir(cfg, seed)
        seeds = trial_seeds(cfg, seed)
        source, target = generate_pair(trial_shift(cfg, seed))
        teacher = load_checkpoint(_require(os.path.join(out, "stage1.ckpt"), "stage1"))
        s2_cfg = replace(
            cfg.stage2,
            model_spec=replace(cfg.stage2.model_spec, init_seed=seeds.stage2_init),
            seed=seeds.stage2_train,
        )
        model, report = train_stage2(
            source, target, teacher, s2_cfg, eval_hook=make_eval_hook(source, target)
        )
        save_checkpoint(model, os.path.join(out, "stage2.ckpt"))
        report.checkpoint_path = "stage2.ckpt"
        report.write_csv(os.path.join(out, "stage2_report.csv"))
        rec = report.records[-1]
        print(f"seed {seed}: stage2 source_acc={rec.source_acc:.4f} target_acc={rec.target_acc:.4f}")


def cmd_bound(cfg: ExperimentConfig) -> None:
    for seed in cfg.seeds:
        out = _seed_dir(cfg, seed)
        source, target = generate_pair(trial_shift(cfg, seed))
        teacher = load_checkpoint(_require(os.path.join(out, "stage1.ckpt"), "stage1"))
        soft_path = _require(os.path.join(out, "soft_labels.txt"), "extract")
        soft = SoftLabels(load_domain(soft_path).features)
        report = bound_report(
            teacher,
            source,
            target,
            soft,
            probe_spec_for(cfg),
            trial_seeds(cfg, seed).probe,
            trials=cfg.probe.trials,
            probe_epochs=cfg.probe.epochs,
        )
        report.write_json(os.path.join(out, "bound.json"))
        print(
            f"seed {seed}: rho={report.rho:.4f} target_risk={report.target_risk:.4f} "
            f"bound_rhs={report.bound_rhs:.4f}"
        )


def cmd_run(cfg: ExperimentConfig) -> None:
    summary = run_experiment(cfg)
    agg = summary["aggregate"]
    print(
        f"{len(cfg.seeds)} seed(s): stage1 target acc {agg['stage1_target_acc_mean']:.4f}"
        f" -> stage2 {agg['stage2_target_acc_mean']:.4f}"
        f" (improvement {agg['improvement_mean']:+.4f})"
    )
    print(f"summary: {os.path.join(cfg.output_dir, 'summary.json')}")


def cmd_sweep(cfg: ExperimentConfig, axis: str, variants: list[str] | None) -> None:
    result = run_sweep(cfg, axis, tuple(variants) if variants else None)
    for row in result["rows"]:
        print(
            f"{row['variant']:>24}  {row['mean_target_acc']:.4f}"
            f" +- {row['stderr_target_acc']:.4f}"
        )
    print(f"sweep table: {os.path.join(cfg.output_dir, f'sweep_{axis}', 'sweep.csv')}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftlab",
        description="Two-stage domain adaptation experiments on synthetic shifts",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="config file (dotted keys); defaults used if omitted")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config output_dir)")
    common.add_argument("--seed", type=int, metavar="N", help="replace the config seed list with one seed")

    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic source/target datasets")
    sub.add_parser("stage1", parents=[common], help="train the aligner")
    sub.add_parser("extract", parents=[common], help="extract soft labels from the stage-1 model")
    sub.add_parser("stage2", parents=[common], help="train the curriculum-distilled student")
    sub.add_parser("bound", parents=[common], help="measure the risk-bound ingredients")
    sub.add_parser("run", parents=[common], help="full pipeline for every seed")
    sweep = sub.add_parser("sweep", parents=[common], help="ablation sweep over one stage-2 axis")
    sweep.add_argument("--axis", required=True, choices=["schedule", "label_mode", "init_mode"])
    sweep.add_argument("--variants", nargs="*", help="subset of variants (default: all for the axis)")
    curves = sub.add_parser("curves", parents=[common], help="merge report CSVs into long format")
    curves.add_argument("reports", nargs="*", help="stage report CSV paths")
    curves.add_argument("--curves-out", default="curves.csv", metavar="PATH")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "curves":
            emit_curves(args.reports, args.curves_out)
            print(f"wrote {args.curves_out}")
            return 0
        cfg = _load_config(args)
        if args.verb == "generate":
            cmd_generate(cfg)
        elif args.verb == "stage1":
            cmd_stage1(cfg)
        elif args.verb == "extract":
            cmd_extract(cfg)
        elif args.verb == "stage2":
            cmd_stage2(cfg)
        elif args.verb == "bound":
            cmd_bound(cfg)
        elif args.verb == "run":
            cmd_run(cfg)
        elif args.verb == "sweep":
            cmd_sweep(cfg, args.axis, args.variants)
        return 0
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
