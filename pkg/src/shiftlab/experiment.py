"""Experiment drivers: full pipeline runs, ablation sweeps, curve export.

Layout under the output directory, one subdirectory per trial seed:

    seed_<s>/source.txt        generated source domain
    seed_<s>/target.txt        generated target domain (features only)
    seed_<s>/stage1.ckpt       aligner checkpoint + stage1_report.csv
    seed_<s>/soft_labels.txt   frozen teacher probabilities
    seed_<s>/stage2.ckpt       student checkpoint + stage2_report.csv
    seed_<s>/bound.json        measured bound ingredients
    summary.json               per-seed final accuracies + aggregate

Every artifact is a pure function of the config contents, so reruns are
byte-identical.  Sweeps reuse the stage-1 model and bound report per seed
across variants (the swept axes only affect stage 2).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig, probe_spec_for, trial_seeds
from .datasets import LabeledDomain, ShiftSpec, UnlabeledDomain, generate_pair, save_domain
from .evaluation import BoundReport, bound_report, make_eval_hook
from .losses import SoftLabels
from .mlp import MlpModel, save_checkpoint
from .schedules import TABLE_MECHANISMS, ScheduleSpec, lambda_at, lambda_formula
from .training import (
    REPORT_COLUMNS,
    TrainingReport,
    extract_soft_labels,
    train_stage1,
    train_stage2,
)

SCHEDULE_AXIS = "schedule"
LABEL_AXIS = "label_mode"
INIT_AXIS = "init_mode"
SWEEP_AXES = {
    SCHEDULE_AXIS: TABLE_MECHANISMS,
    LABEL_AXIS: ("soft", "hard"),
    INIT_AXIS: ("fresh", "from_stage1"),
}


@dataclass
class TrialResult:
    seed: int
    stage1_source_acc: float
    stage1_target_acc: float
    stage2_source_acc: float
    stage2_target_acc: float

    @property
    def improvement(self) -> float:
        return self.stage2_target_acc - self.stage1_target_acc


@dataclass
class _TrialCacheEntry:
    """Stage-2-independent products of one trial seed."""

    source: LabeledDomain
    target: UnlabeledDomain
    teacher: MlpModel
    report1: TrainingReport
    bound: BoundReport | None = None


def trial_shift(cfg: ExperimentConfig, seed: int) -> ShiftSpec:
    return replace(cfg.shift, seed=trial_seeds(cfg, seed).data)


def _trial_stage1(cfg: ExperimentConfig, seed: int, cache: dict | None) -> _TrialCacheEntry:
    if cache is not None and seed in cache:
        return cache[seed]
    seeds = trial_seeds(cfg, seed)
    source, target = generate_pair(trial_shift(cfg, seed))
    s1_cfg = replace(
        cfg.stage1,
        model_spec=replace(cfg.stage1.model_spec, init_seed=seeds.stage1_init),
        seed=seeds.stage1_train,
    )
    teacher, report1 = train_stage1(
        source, target, s1_cfg, eval_hook=make_eval_hook(source, target)
    )
    entry = _TrialCacheEntry(source=source, target=target, teacher=teacher, report1=report1)
    if cache is not None:
        cache[seed] = entry
    return entry


def _trial_bound(cfg: ExperimentConfig, seed: int, entry: _TrialCacheEntry, soft: SoftLabels) -> BoundReport:
    if entry.bound is None:
        entry.bound = bound_report(
            entry.teacher,
            entry.source,
            entry.target,
            soft,
            probe_spec_for(cfg),
            trial_seeds(cfg, seed).probe,
            trials=cfg.probe.trials,
            probe_epochs=cfg.probe.epochs,
        )
    return entry.bound


def run_trial(
    cfg: ExperimentConfig,
    seed: int,
    out_dir: str | os.PathLike | None = None,
    teacher_cache: dict | None = None,
) -> TrialResult:
    """One full pipeline pass for one trial seed, optionally writing artifacts.

    ``teacher_cache`` maps trial seeds to stage-2-independent products; sweeps
    pass one so stage 1 and the bound are not recomputed per variant.
    """
    seeds = trial_seeds(cfg, seed)
    entry = _trial_stage1(cfg, seed, teacher_cache)
    source, target, teacher, report1 = entry.source, entry.target, entry.teacher, entry.report1

    soft = extract_soft_labels(teacher, target, cfg.stage2.temperature)
    s2_cfg = replace(
        cfg.stage2,
        model_spec=replace(cfg.stage2.model_spec, init_seed=seeds.stage2_init),
        seed=seeds.stage2_train,
    )
    student, report2 = train_stage2(
        source, target, teacher, s2_cfg, eval_hook=make_eval_hook(source, target)
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_domain(source, os.path.join(out_dir, "source.txt"))
        save_domain(target, os.path.join(out_dir, "target.txt"))
        save_checkpoint(teacher, os.path.join(out_dir, "stage1.ckpt"))
        report1.checkpoint_path = "stage1.ckpt"
        report1.write_csv(os.path.join(out_dir, "stage1_report.csv"))
        _save_soft_labels(soft, os.path.join(out_dir, "soft_labels.txt"), target.num_classes)
        save_checkpoint(student, os.path.join(out_dir, "stage2.ckpt"))
        report2.checkpoint_path = "stage2.ckpt"
        report2.write_csv(os.path.join(out_dir, "stage2_report.csv"))
        _trial_bound(cfg, seed, entry, soft).write_json(os.path.join(out_dir, "bound.json"))

    rec1 = report1.records[-1]
    rec2 = report2.records[-1]
    return TrialResult(
        seed=seed,
        stage1_source_acc=rec1.source_acc,
        stage1_target_acc=rec1.target_acc,
        stage2_source_acc=rec2.source_acc,
        stage2_target_acc=rec2.target_acc,
    )


def _save_soft_labels(soft: SoftLabels, path, num_classes: int) -> None:
    """Soft labels reuse the dataset file format (one probability row per sample)."""
    domain = UnlabeledDomain(soft.probs, num_classes, name="soft_labels")
    save_domain(domain, path)


def mean_and_stderr(values: list[float]) -> tuple[float, float]:
    """Sample mean and standard error (std/sqrt(n), ddof=1; 0 for n=1)."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if len(arr) < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(len(arr)))


def summarize(results: list[TrialResult]) -> dict:
    s1_mean, s1_err = mean_and_stderr([r.stage1_target_acc for r in results])
    s2_mean, s2_err = mean_and_stderr([r.stage2_target_acc for r in results])
    imp_mean, imp_err = mean_and_stderr([r.improvement for r in results])
    return {
        "seeds": [r.seed for r in results],
        "per_seed": [
            {
                "seed": r.seed,
                "stage1_source_acc": r.stage1_source_acc,
                "stage1_target_acc": r.stage1_target_acc,
                "stage2_source_acc": r.stage2_source_acc,
                "stage2_target_acc": r.stage2_target_acc,
                "improvement": r.improvement,
            }
            for r in results
        ],
        "aggregate": {
            "stage1_target_acc_mean": s1_mean,
            "stage1_target_acc_stderr": s1_err,
            "stage2_target_acc_mean": s2_mean,
            "stage2_target_acc_stderr": s2_err,
            "improvement_mean": imp_mean,
            "improvement_stderr": imp_err,
        },
    }


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Full pipeline for every trial seed; writes artifacts and summary.json."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    results = [
        run_trial(cfg, seed, out_dir=os.path.join(cfg.output_dir, f"seed_{seed}"))
        for seed in cfg.seeds
    ]
    summary = summarize(results)
    with open(os.path.join(cfg.output_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def apply_variant(cfg: ExperimentConfig, axis: str, variant: str) -> ExperimentConfig:
    if axis == SCHEDULE_AXIS:
        stage2 = replace(cfg.stage2, schedule=replace(cfg.stage2.schedule, mechanism=variant))
    elif axis == LABEL_AXIS:
        stage2 = replace(cfg.stage2, label_mode=variant)
    elif axis == INIT_AXIS:
        stage2 = replace(cfg.stage2, init_mode=variant)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; known: {', '.join(SWEEP_AXES)}")
    return replace(cfg, stage2=stage2)


def _variant_detail(cfg: ExperimentConfig, axis: str, variant: str) -> str:
    if axis == SCHEDULE_AXIS:
        return lambda_formula(variant)
    return lambda_formula(cfg.stage2.schedule.mechanism)


def run_sweep(cfg: ExperimentConfig, axis: str, variants: tuple[str, ...] | None = None) -> dict:
    """Hold everything fixed except one stage-2 axis; aggregate per variant.

    Writes per-variant artifacts under ``sweep_<axis>/<variant>/seed_<s>/``,
    a per-cell CSV, and an aggregate CSV with one row per variant.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; known: {', '.join(SWEEP_AXES)}")
    if variants is None:
        variants = SWEEP_AXES[axis]
    else:
        known = SWEEP_AXES[axis]
        for v in variants:
            if axis == SCHEDULE_AXIS:
                apply_variant(cfg, axis, v)  # validates mechanism syntax
            elif v not in known:
                raise ValueError(f"unknown {axis} variant {v!r}; valid: {', '.join(known)}")

    sweep_dir = os.path.join(cfg.output_dir, f"sweep_{axis}")
    os.makedirs(sweep_dir, exist_ok=True)
    teacher_cache: dict = {}
    cells: list[tuple[str, int, float]] = []
    rows = []
    for variant in variants:
        variant_cfg = apply_variant(cfg, axis, variant)
        accs = []
        for seed in cfg.seeds:
            out_dir = os.path.join(sweep_dir, _safe_name(variant), f"seed_{seed}")
            result = run_trial(variant_cfg, seed, out_dir=out_dir, teacher_cache=teacher_cache)
            cells.append((variant, seed, result.stage2_target_acc))
            accs.append(result.stage2_target_acc)
        mean, err = mean_and_stderr(accs)
        rows.append((variant, _variant_detail(cfg, axis, variant), mean, err))

    with open(os.path.join(sweep_dir, "cells.csv"), "w", encoding="utf-8") as fh:
        fh.write("variant,seed,target_acc\n")
        for variant, seed, acc in cells:
            fh.write(f"{variant},{seed},{acc!r}\n")
    with open(os.path.join(sweep_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write("variant,lambda_formula,mean_target_acc,stderr_target_acc\n")
        for variant, detail, mean, err in rows:
            fh.write(f"{variant},{detail},{mean!r},{err!r}\n")
    return {
        "axis": axis,
        "variants": list(variants),
        "rows": [
            {"variant": v, "detail": d, "mean_target_acc": m, "stderr_target_acc": e}
            for v, d, m, e in rows
        ],
        "cells": [{"variant": v, "seed": s, "target_acc": a} for v, s, a in cells],
    }


def _safe_name(variant: str) -> str:
    return variant.replace("(", "_").replace(")", "").replace(".", "p")


LAMBDA_GRID_POINTS = 101


def emit_curves(report_csv_paths: list[str], out_path: str | os.PathLike) -> None:
    """Merge per-epoch report CSVs into one long-format CSV
    (run_id, epoch, series, value) for external plotting.

    Also appends a lambda-vs-progress series per known mechanism, sampled on
    a 101-point grid (rows ``schedule:<name>`` with epoch = grid index, so
    r = epoch / 100).
    """
    if not report_csv_paths:
        raise ValueError("emit_curves needs at least one report CSV")
    series_cols = REPORT_COLUMNS[1:]
    lines = ["run_id,epoch,series,value"]
    seen: dict[str, int] = {}
    for path in report_csv_paths:
        stem = os.path.splitext(os.path.basename(path))[0]
        seen[stem] = seen.get(stem, 0) + 1
        run_id = stem if seen[stem] == 1 else f"{stem}#{seen[stem]}"
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty report CSV") from None
            if tuple(header) != REPORT_COLUMNS:
                raise ValueError(
                    f"{path}: line 1: unexpected header {header!r}; "
                    f"expected {','.join(REPORT_COLUMNS)}"
                )
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(REPORT_COLUMNS):
                    raise ValueError(
                        f"{path}: line {lineno}: expected {len(REPORT_COLUMNS)} fields, "
                        f"found {len(row)}"
                    )
                try:
                    epoch = int(row[0])
                    values = [float(tok) for tok in row[1:]]
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: non-numeric field") from None
                for name, value in zip(series_cols, values):
                    lines.append(f"{run_id},{epoch},{name},{value!r}")

    for mechanism in TABLE_MECHANISMS:
        spec = ScheduleSpec(mechanism=mechanism)
        for i in range(LAMBDA_GRID_POINTS):
            lam = lambda_at(spec, i / (LAMBDA_GRID_POINTS - 1))
            lines.append(f"schedule:{mechanism},{i},lambda,{lam!r}")

    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
