"""Two-stage training pipeline.

Stage 1 trains an aligner on labeled source batches (cross-entropy) plus a
weighted MMD between source and target features.  Its temperature-softened
predictions on the target domain become frozen soft labels.  Stage 2 trains
a fresh network on a curriculum blend: alpha * lambda * target loss +
(1 - lambda) * source cross-entropy, with lambda recomputed once per epoch
at progress r = T / T_max (T counted from 1).

Both loops receive the target domain stripped of its evaluation-only hidden
labels; per-epoch accuracies enter reports only through a caller-supplied
evaluation hook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .datasets import LabeledDomain, UnlabeledDomain
from .losses import MmdConfig, SoftLabels, cross_entropy, kl_distill, mmd, mmd_value, softmax
from .mlp import Gradients, MlpModel, MlpSpec, backward, forward, init_model
from .numeric import Rng
from .schedules import LrSpec, ScheduleSpec, lambda_at, lr_at

REPORT_COLUMNS = ("epoch", "lambda", "lr", "source_ce", "target_loss", "mmd", "source_acc", "target_acc")

# (source_acc, target_acc) measured on the full domains after an epoch
EvalHook = Callable[[MlpModel], tuple[float, float]]


@dataclass
class Stage1Config:
    model_spec: MlpSpec
    epochs: int = 100
    batch_size: int = 32
    align_weight: float = 1.0
    mmd: MmdConfig = field(default_factory=MmdConfig)
    lr: LrSpec = field(default_factory=LrSpec)
    momentum: float = 0.9
    weight_decay: float = 5e-4
    head_lr_mult: float = 10.0
    seed: int = 0

    def __post_init__(self):
        _check_common(self)
        if self.align_weight < 0:
            raise ValueError(f"align_weight must be >= 0, got {self.align_weight}")


@dataclass
class Stage2Config:
    model_spec: MlpSpec
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    label_mode: str = "soft"
    init_mode: str = "fresh"
    temperature: float = 2.0
    epochs: int = 200
    batch_size: int = 32
    lr: LrSpec = field(default_factory=LrSpec)
    momentum: float = 0.9
    weight_decay: float = 5e-4
    head_lr_mult: float = 10.0
    seed: int = 0

    def __post_init__(self):
        _check_common(self)
        if self.label_mode not in ("soft", "hard"):
            raise ValueError(f"label_mode must be 'soft' or 'hard', got {self.label_mode!r}")
        if self.init_mode not in ("fresh", "from_stage1"):
            raise ValueError(f"init_mode must be 'fresh' or 'from_stage1', got {self.init_mode!r}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


def _check_common(cfg) -> None:
    if cfg.epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {cfg.epochs}")
    if cfg.batch_size < 2:
        raise ValueError(f"batch_size must be >= 2, got {cfg.batch_size}")
    if not (0.0 <= cfg.momentum < 1.0):
        raise ValueError(f"momentum must lie in [0, 1), got {cfg.momentum}")
    if cfg.weight_decay < 0:
        raise ValueError(f"weight_decay must be >= 0, got {cfg.weight_decay}")
    if cfg.head_lr_mult <= 0:
        raise ValueError(f"head_lr_mult must be > 0, got {cfg.head_lr_mult}")


@dataclass
class OptimizerState:
    """Per-parameter velocities, shapes mirroring the model, zero at start."""

    vel_weights: list[np.ndarray]
    vel_biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "OptimizerState":
        return cls(
            [np.zeros_like(w) for w in model.weights],
            [np.zeros_like(b) for b in model.biases],
        )


@dataclass
class EpochRecord:
    epoch: int
    lam: float
    lr: float
    source_ce: float
    target_loss: float
    mmd: float
    source_acc: float
    target_acc: float

    def row(self) -> tuple:
        return (
            self.epoch, self.lam, self.lr, self.source_ce,
            self.target_loss, self.mmd, self.source_acc, self.target_acc,
        )


@dataclass
class TrainingReport:
    records: list[EpochRecord] = field(default_factory=list)
    checkpoint_path: str | None = None

    def write_csv(self, path) -> None:
        lines = [",".join(REPORT_COLUMNS)]
        for rec in self.records:
            epoch, *vals = rec.row()
            lines.append(",".join([str(epoch)] + [repr(float(v)) for v in vals]))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def sgd_step(
    model: MlpModel,
    grads: Gradients,
    opt: OptimizerState,
    lr: float,
    momentum: float,
    weight_decay: float,
    layer_lr_mults: Sequence[float] | None = None,
) -> None:
    """In-place momentum update: v <- momentum*v + (grad + wd*param);
    param <- param - lr*mult*v.  Weight decay applies to weights and biases
    alike; the per-layer multiplier is decoupled from the velocity."""
    n = model.num_layers
    if layer_lr_mults is None:
        layer_lr_mults = [1.0] * n
    if len(layer_lr_mults) != n:
        raise ValueError(f"need {n} layer multipliers, got {len(layer_lr_mults)}")
    for k in range(n):
        gw, gb = grads.weights[k], grads.biases[k]
        if gw.shape != model.weights[k].shape or gb.shape != model.biases[k].shape:
            raise ValueError(f"gradient shapes at layer {k} do not match the model")
        opt.vel_weights[k] *= momentum
        opt.vel_weights[k] += gw + weight_decay * model.weights[k]
        model.weights[k] -= lr * layer_lr_mults[k] * opt.vel_weights[k]
        opt.vel_biases[k] *= momentum
        opt.vel_biases[k] += gb + weight_decay * model.biases[k]
        model.biases[k] -= lr * layer_lr_mults[k] * opt.vel_biases[k]


def head_lr_mults(model: MlpModel, head_mult: float) -> list[float]:
    """Unit multiplier everywhere except the classifier head."""
    return [1.0] * (model.num_layers - 1) + [float(head_mult)]


def batch_indices(perm: np.ndarray, step: int, batch_size: int) -> np.ndarray:
    """Minibatch positions with wraparound, so the shorter domain cycles and
    every batch keeps its full size."""
    n = len(perm)
    start = step * batch_size
    return perm[(start + np.arange(batch_size)) % n]


def steps_per_epoch(n_source: int, n_target: int, batch_size: int) -> int:
    return max(1, math.ceil(max(n_source, n_target) / batch_size))


def extract_soft_labels(teacher: MlpModel, target: UnlabeledDomain, temperature: float) -> SoftLabels:
    """Teacher's softened class probabilities for every target sample."""
    trace = forward(teacher, target.features)
    return SoftLabels(softmax(trace.logits, temperature))


def harden(labels: SoftLabels) -> np.ndarray:
    """Row-wise argmax; ties break toward the lowest class index."""
    return np.argmax(labels.probs, axis=1).astype(np.int64)


def _eval_or_nan(hook: EvalHook | None, model: MlpModel) -> tuple[float, float]:
    if hook is None:
        return math.nan, math.nan
    src_acc, tgt_acc = hook(model)
    return float(src_acc), float(tgt_acc)


def train_stage1(
    source: LabeledDomain,
    target: UnlabeledDomain,
    cfg: Stage1Config,
    eval_hook: EvalHook | None = None,
) -> tuple[MlpModel, TrainingReport]:
    """Aligned source training: cross-entropy on source logits plus
    align_weight * MMD between source and target feature batches.

    Both domains are reshuffled every epoch from a generator seeded at
    cfg.seed; paired minibatches cycle the shorter domain.  The learning
    rate anneals with epoch progress T / T_max, T counted from 1.
    """
    target = target.without_hidden_labels()
    if source.features.shape[1] != target.features.shape[1]:
        raise ValueError(
            f"source dim {source.features.shape[1]} != target dim {target.features.shape[1]}"
        )
    model = init_model(cfg.model_spec)
    opt = OptimizerState.zeros_like(model)
    mults = head_lr_mults(model, cfg.head_lr_mult)
    shuffler = Rng(cfg.seed)
    batch = cfg.batch_size
    steps = steps_per_epoch(len(source), len(target), batch)
    report = TrainingReport()

    for epoch in range(1, cfg.epochs + 1):
        r = epoch / cfg.epochs
        lr = lr_at(cfg.lr, r)
        perm_s = shuffler.permutation(len(source))
        perm_t = shuffler.permutation(len(target))
        ce_sum = 0.0
        mmd_sum = 0.0
        for step in range(steps):
            idx_s = batch_indices(perm_s, step, batch)
            idx_t = batch_indices(perm_t, step, batch)
            xb = np.concatenate([source.features[idx_s], target.features[idx_t]], axis=0)
            trace = forward(model, xb)
            ce, d_src_logits = cross_entropy(trace.logits[:batch], source.labels[idx_s])
            feats_s = trace.features[:batch]
            feats_t = trace.features[batch:]
            d_logits = np.zeros_like(trace.logits)
            d_logits[:batch] = d_src_logits
            if cfg.align_weight > 0.0:
                mmd_val, d_fs, d_ft = mmd(feats_s, feats_t, cfg.mmd)
                d_feats = np.concatenate(
                    [cfg.align_weight * d_fs, cfg.align_weight * d_ft], axis=0
                )
            else:
                mmd_val = mmd_value(feats_s, feats_t, cfg.mmd)
                d_feats = None
            grads = backward(model, trace, d_logits, d_feats)
            sgd_step(model, grads, opt, lr, cfg.momentum, cfg.weight_decay, mults)
            ce_sum += ce
            mmd_sum += mmd_val
        src_acc, tgt_acc = _eval_or_nan(eval_hook, model)
        mean_mmd = mmd_sum / steps
        report.records.append(
            EpochRecord(
                epoch=epoch,
                lam=0.0,
                lr=lr,
                source_ce=ce_sum / steps,
                target_loss=cfg.align_weight * mean_mmd,
                mmd=mean_mmd,
                source_acc=src_acc,
                target_acc=tgt_acc,
            )
        )
    return model, report


def train_stage2(
    source: LabeledDomain,
    target: UnlabeledDomain,
    teacher: MlpModel,
    cfg: Stage2Config,
    eval_hook: EvalHook | None = None,
) -> tuple[MlpModel, TrainingReport]:
    """Curriculum-blended training against the frozen teacher.

    The student starts fresh or from the teacher's weights (init_mode).  Soft
    labels are extracted once (the teacher never changes, so per-epoch
    re-extraction would be value-identical).  In 'hard' mode the target term
    is plain cross-entropy against the argmax of those labels.  The report's
    mmd column is a feature-alignment diagnostic measured on each epoch's
    last minibatch; it plays no part in the loss.
    """
    target = target.without_hidden_labels()
    if source.features.shape[1] != target.features.shape[1]:
        raise ValueError(
            f"source dim {source.features.shape[1]} != target dim {target.features.shape[1]}"
        )
    if teacher.spec.input_dim != target.features.shape[1]:
        raise ValueError(
            f"teacher expects {teacher.spec.input_dim} input dims, "
            f"target has {target.features.shape[1]}"
        )
    if cfg.init_mode == "from_stage1":
        model = teacher.copy()
    else:
        model = init_model(cfg.model_spec)
    soft = extract_soft_labels(teacher, target, cfg.temperature)
    hard = harden(soft)

    opt = OptimizerState.zeros_like(model)
    mults = head_lr_mults(model, cfg.head_lr_mult)
    shuffler = Rng(cfg.seed)
    batch = cfg.batch_size
    steps = steps_per_epoch(len(source), len(target), batch)
    mmd_diag_cfg = MmdConfig()
    report = TrainingReport()

    for epoch in range(1, cfg.epochs + 1):
        r = epoch / cfg.epochs
        lam = lambda_at(cfg.schedule, r)
        lr = lr_at(cfg.lr, r)
        target_coeff = cfg.schedule.alpha * lam
        source_coeff = 1.0 - lam
        perm_s = shuffler.permutation(len(source))
        perm_t = shuffler.permutation(len(target))
        ce_sum = 0.0
        tgt_sum = 0.0
        mmd_diag = 0.0
        for step in range(steps):
            idx_s = batch_indices(perm_s, step, batch)
            idx_t = batch_indices(perm_t, step, batch)
            xb = np.concatenate([source.features[idx_s], target.features[idx_t]], axis=0)
            trace = forward(model, xb)
            ce, d_src = cross_entropy(trace.logits[:batch], source.labels[idx_s])
            if cfg.label_mode == "soft":
                tgt_loss, d_tgt = kl_distill(
                    trace.logits[batch:], SoftLabels(soft.probs[idx_t]), cfg.temperature
                )
            else:
                tgt_loss, d_tgt = cross_entropy(trace.logits[batch:], hard[idx_t])
            d_logits = np.concatenate([source_coeff * d_src, target_coeff * d_tgt], axis=0)
            grads = backward(model, trace, d_logits)
            sgd_step(model, grads, opt, lr, cfg.momentum, cfg.weight_decay, mults)
            ce_sum += ce
            tgt_sum += tgt_loss
            if step == steps - 1:
                mmd_diag = mmd_value(trace.features[:batch], trace.features[batch:], mmd_diag_cfg)
        src_acc, tgt_acc = _eval_or_nan(eval_hook, model)
        report.records.append(
            EpochRecord(
                epoch=epoch,
                lam=lam,
                lr=lr,
                source_ce=ce_sum / steps,
                target_loss=tgt_sum / steps,
                mmd=mmd_diag,
                source_acc=src_acc,
                target_acc=tgt_acc,
            )
        )
    return model, report
