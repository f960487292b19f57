"""Experiment configuration: flat text files with dotted keys.

Format: one ``key = value`` pair per line; blank lines and ``#`` comments are
ignored.  Lists are comma-separated.  Every key has a default, so an empty
file is a valid benchmark-shaped experiment.  Unknown keys are rejected with
the offending name, as are out-of-range values.

One experiment runs its pipeline once per trial seed.  Each trial fans its
seed out into independent sub-streams (data, inits, shuffling, probes) via
``derive_seed``, combined with the per-section base seeds, so trials never
share randomness and single-verb runs agree with full-pipeline runs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .datasets import ShiftSpec
from .losses import MmdConfig
from .mlp import MlpSpec
from .numeric import derive_seed
from .schedules import LrSpec, ScheduleSpec
from .training import Stage1Config, Stage2Config


@dataclass
class ProbeConfig:
    hidden_dims: tuple[int, ...] = (16, 8)
    trials: int = 3
    epochs: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"probe.trials must be >= 1, got {self.trials}")
        if self.epochs < 1:
            raise ValueError(f"probe.epochs must be >= 1, got {self.epochs}")


@dataclass
class ExperimentConfig:
    shift: ShiftSpec
    stage1: Stage1Config
    stage2: Stage2Config
    probe: ProbeConfig
    seeds: tuple[int, ...]
    output_dir: str

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be nonempty")


@dataclass(frozen=True)
class TrialSeeds:
    """Derived sub-stream seeds for one trial."""

    data: int
    stage1_init: int
    stage1_train: int
    stage2_init: int
    stage2_train: int
    probe: int


def trial_seeds(cfg: ExperimentConfig, trial_seed: int) -> TrialSeeds:
    return TrialSeeds(
        data=derive_seed(cfg.shift.seed, trial_seed, 1),
        stage1_init=derive_seed(cfg.stage1.seed, trial_seed, 2),
        stage1_train=derive_seed(cfg.stage1.seed, trial_seed, 3),
        stage2_init=derive_seed(cfg.stage2.seed, trial_seed, 4),
        stage2_train=derive_seed(cfg.stage2.seed, trial_seed, 5),
        probe=derive_seed(cfg.probe.seed, trial_seed, 6),
    )


def parse_config_text(text: str, source_name: str = "<config>") -> dict[str, str]:
    """Parse dotted-key lines into a string map, rejecting duplicates."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source_name}: line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"{source_name}: line {lineno}: empty key")
        if key in out:
            raise ValueError(f"{source_name}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _take(kv: dict[str, str], key: str, default: str) -> str:
    return kv.pop(key, default)


def _as_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"config field {key} must be an integer, got {raw!r}") from None


def _as_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"config field {key} must be a number, got {raw!r}") from None


def _as_int_list(raw: str, key: str) -> tuple[int, ...]:
    items = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not items:
        raise ValueError(f"config field {key} must be a nonempty comma-separated list")
    return tuple(_as_int(tok, key) for tok in items)


def _as_float_list(raw: str, key: str) -> tuple[float, ...]:
    items = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not items:
        raise ValueError(f"config field {key} must be a nonempty comma-separated list")
    return tuple(_as_float(tok, key) for tok in items)


def _lr_spec(kv: dict[str, str], prefix: str) -> LrSpec:
    return LrSpec(
        eta0=_as_float(_take(kv, f"{prefix}.lr.eta0", "0.01"), f"{prefix}.lr.eta0"),
        gamma=_as_float(_take(kv, f"{prefix}.lr.gamma", "10"), f"{prefix}.lr.gamma"),
        beta=_as_float(_take(kv, f"{prefix}.lr.beta", "0.75"), f"{prefix}.lr.beta"),
    )


def build_experiment_config(
    kv: dict[str, str], source_name: str = "<config>"
) -> ExperimentConfig:
    """Assemble and validate an ExperimentConfig from a parsed key map.

    Validation errors name the offending dotted key.
    """
    kv = dict(kv)

    def wrap(section: str, build):
        try:
            return build()
        except ValueError as exc:
            raise ValueError(f"{source_name}: invalid {section}: {exc}") from None

    dim = _as_int(_take(kv, "shift.dim", "2"), "shift.dim")
    translation_raw = _take(kv, "shift.translation", "")
    translation = (
        np.array(_as_float_list(translation_raw, "shift.translation"), dtype=np.float64)
        if translation_raw
        else None
    )
    shift = wrap(
        "shift",
        lambda: ShiftSpec(
            num_classes=_as_int(_take(kv, "shift.num_classes", "3"), "shift.num_classes"),
            dim=dim,
            per_class_count=_as_int(
                _take(kv, "shift.per_class_count", "200"), "shift.per_class_count"
            ),
            rotation_deg=_as_float(_take(kv, "shift.rotation_deg", "30"), "shift.rotation_deg"),
            translation=translation,
            noise_sigma=_as_float(_take(kv, "shift.noise_sigma", "0.4"), "shift.noise_sigma"),
            seed=_as_int(_take(kv, "shift.seed", "0"), "shift.seed"),
        ),
    )

    def model_spec(prefix: str, default_hidden: str) -> MlpSpec:
        hidden = _as_int_list(_take(kv, f"{prefix}.hidden_dims", default_hidden), f"{prefix}.hidden_dims")
        return MlpSpec(shift.dim, hidden, shift.num_classes, init_seed=0)

    stage1 = wrap(
        "stage1",
        lambda: Stage1Config(
            model_spec=model_spec("stage1", "64,32"),
            epochs=_as_int(_take(kv, "stage1.epochs", "100"), "stage1.epochs"),
            batch_size=_as_int(_take(kv, "stage1.batch_size", "32"), "stage1.batch_size"),
            align_weight=_as_float(_take(kv, "stage1.align_weight", "1.0"), "stage1.align_weight"),
            mmd=MmdConfig(
                bandwidths=_as_float_list(
                    _take(kv, "stage1.mmd.bandwidths", "0.5,1,2,4"), "stage1.mmd.bandwidths"
                )
            ),
            lr=_lr_spec(kv, "stage1"),
            momentum=_as_float(_take(kv, "stage1.momentum", "0.9"), "stage1.momentum"),
            weight_decay=_as_float(
                _take(kv, "stage1.weight_decay", "5e-4"), "stage1.weight_decay"
            ),
            head_lr_mult=_as_float(
                _take(kv, "stage1.head_lr_mult", "10"), "stage1.head_lr_mult"
            ),
            seed=_as_int(_take(kv, "stage1.seed", "0"), "stage1.seed"),
        ),
    )

    stage2 = wrap(
        "stage2",
        lambda: Stage2Config(
            model_spec=model_spec("stage2", "64,32"),
            schedule=ScheduleSpec(
                mechanism=_take(kv, "stage2.schedule.mechanism", "steep_exp_increment"),
                alpha=_as_float(_take(kv, "stage2.schedule.alpha", "1.0"), "stage2.schedule.alpha"),
            ),
            label_mode=_take(kv, "stage2.label_mode", "soft"),
            init_mode=_take(kv, "stage2.init_mode", "fresh"),
            temperature=_as_float(_take(kv, "stage2.temperature", "2"), "stage2.temperature"),
            epochs=_as_int(_take(kv, "stage2.epochs", "200"), "stage2.epochs"),
            batch_size=_as_int(_take(kv, "stage2.batch_size", "32"), "stage2.batch_size"),
            lr=_lr_spec(kv, "stage2"),
            momentum=_as_float(_take(kv, "stage2.momentum", "0.9"), "stage2.momentum"),
            weight_decay=_as_float(
                _take(kv, "stage2.weight_decay", "5e-4"), "stage2.weight_decay"
            ),
            head_lr_mult=_as_float(
                _take(kv, "stage2.head_lr_mult", "10"), "stage2.head_lr_mult"
            ),
            seed=_as_int(_take(kv, "stage2.seed", "0"), "stage2.seed"),
        ),
    )

    probe = wrap(
        "probe",
        lambda: ProbeConfig(
            hidden_dims=_as_int_list(_take(kv, "probe.hidden_dims", "16,8"), "probe.hidden_dims"),
            trials=_as_int(_take(kv, "probe.trials", "3"), "probe.trials"),
            epochs=_as_int(_take(kv, "probe.epochs", "60"), "probe.epochs"),
            seed=_as_int(_take(kv, "probe.seed", "0"), "probe.seed"),
        ),
    )

    seeds = _as_int_list(_take(kv, "seeds", "0,1,2"), "seeds")
    output_dir = _take(kv, "output_dir", "out")

    if kv:
        unknown = ", ".join(sorted(kv))
        raise ValueError(f"{source_name}: unknown config keys: {unknown}")
    return ExperimentConfig(
        shift=shift, stage1=stage1, stage2=stage2, probe=probe, seeds=seeds, output_dir=output_dir
    )


def load_experiment_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return build_experiment_config(parse_config_text(text, str(path)), str(path))


def probe_spec_for(cfg: ExperimentConfig, init_seed: int = 0) -> MlpSpec:
    return MlpSpec(cfg.shift.dim, cfg.probe.hidden_dims, cfg.shift.num_classes, init_seed=init_seed)
