"""Evaluation and theory-quantity measurement.

Everything here uses 0/1 risk, under which the triangle step
|risk-vs-pseudo-labels - risk-vs-truth| <= (pseudo-label error rate) is
exact, not just an inequality in expectation.  The combined-risk term is
estimated by training a handful of probe networks on the union of the
labeled source and the pseudo-labeled target and keeping the best sum of
the two risks; a minimum over finitely many probes upper-bounds the true
minimum over the hypothesis class, which keeps the reported bound honest.

The feature-space distribution distance in the bound is not computable for
an MLP hypothesis class; the report carries a feature MMD as an explicitly
labeled proxy.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDomain, UnlabeledDomain
from .losses import MmdConfig, SoftLabels, cross_entropy, mmd_value
from .mlp import MlpModel, MlpSpec, backward, forward, init_model
from .numeric import Rng, derive_seed
from .schedules import LrSpec, lr_at
from .training import (
    EvalHook,
    OptimizerState,
    batch_indices,
    steps_per_epoch,
    harden,
    head_lr_mults,
    sgd_step,
)


def predict(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Argmax class per row, ties toward the lowest index."""
    return np.argmax(forward(model, features).logits, axis=1).astype(np.int64)


def accuracy(model: MlpModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax predictions matching the labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("accuracy is undefined on an empty sample")
    if len(labels) != features.shape[0]:
        raise ValueError(f"{features.shape[0]} rows but {len(labels)} labels")
    return float((predict(model, features) == labels).mean())


def risk_01(model: MlpModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Empirical 0/1 risk: 1 - accuracy."""
    return 1.0 - accuracy(model, features, labels)


def rho(pseudo: SoftLabels, true_labels: np.ndarray) -> float:
    """Inaccurate pseudo-label ratio: fraction of rows whose hardened pseudo
    label disagrees with the true label."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    if len(true_labels) != len(pseudo):
        raise ValueError(f"{len(pseudo)} pseudo rows but {len(true_labels)} true labels")
    return float((harden(pseudo) != true_labels).mean())


def make_eval_hook(source: LabeledDomain, target: UnlabeledDomain) -> EvalHook:
    """Per-epoch accuracy closure for the training loops.

    Owns the target's hidden labels so the loops themselves never see them.
    """
    if target.hidden_labels is None:
        raise ValueError("evaluation hook needs a target with hidden labels")
    tgt_labels = target.hidden_labels

    def hook(model: MlpModel) -> tuple[float, float]:
        return (
            accuracy(model, source.features, source.labels),
            accuracy(model, target.features, tgt_labels),
        )

    return hook


def train_probe(
    features: np.ndarray,
    labels: np.ndarray,
    spec: MlpSpec,
    *,
    epochs: int = 60,
    batch_size: int = 32,
    lr: LrSpec = LrSpec(),
    momentum: float = 0.9,
    weight_decay: float = 5e-4,
    head_lr_mult: float = 10.0,
    shuffle_seed: int = 0,
) -> MlpModel:
    """Plain supervised cross-entropy training of one probe network."""
    model = init_model(spec)
    opt = OptimizerState.zeros_like(model)
    mults = head_lr_mults(model, head_lr_mult)
    shuffler = Rng(shuffle_seed)
    n = features.shape[0]
    batch = min(batch_size, n)
    steps = steps_per_epoch(n, n, batch)
    for epoch in range(1, epochs + 1):
        rate = lr_at(lr, epoch / epochs)
        perm = shuffler.permutation(n)
        for step in range(steps):
            idx = batch_indices(perm, step, batch)
            trace = forward(model, features[idx])
            _, d_logits = cross_entropy(trace.logits, labels[idx])
            grads = backward(model, trace, d_logits)
            sgd_step(model, grads, opt, rate, momentum, weight_decay, mults)
    return model


def estimate_ct(
    source: LabeledDomain,
    target_feats: np.ndarray,
    pseudo_hard: np.ndarray,
    probe_spec: MlpSpec,
    trials: int,
    seed: int,
    *,
    epochs: int = 60,
    batch_size: int = 32,
) -> float:
    """Upper estimate of the best achievable source-risk + pseudo-target-risk.

    Trains ``trials`` independently seeded probes on source (true labels)
    stacked with target (pseudo labels) and returns the minimum over probes
    of the summed risks.  More trials can only tighten the estimate.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    pseudo_hard = np.asarray(pseudo_hard, dtype=np.int64)
    if len(pseudo_hard) != target_feats.shape[0]:
        raise ValueError(
            f"{target_feats.shape[0]} target rows but {len(pseudo_hard)} pseudo labels"
        )
    union_feats = np.concatenate([source.features, target_feats], axis=0)
    union_labels = np.concatenate([source.labels, pseudo_hard])
    best = np.inf
    for trial in range(trials):
        spec = MlpSpec(
            probe_spec.input_dim,
            probe_spec.hidden_dims,
            probe_spec.num_classes,
            init_seed=derive_seed(seed, trial, 1),
        )
        probe = train_probe(
            union_feats,
            union_labels,
            spec,
            epochs=epochs,
            batch_size=batch_size,
            shuffle_seed=derive_seed(seed, trial, 2),
        )
        combined = risk_01(probe, source.features, source.labels) + risk_01(
            probe, target_feats, pseudo_hard
        )
        best = min(best, combined)
    return float(best)


@dataclass
class BoundReport:
    """Measured ingredients of the target-risk upper bound."""

    rho: float
    source_risk: float
    target_risk: float
    pseudo_target_risk: float
    c_t_estimate: float
    mmd_proxy: float
    bound_rhs: float

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "source_risk": self.source_risk,
            "target_risk": self.target_risk,
            "pseudo_target_risk": self.pseudo_target_risk,
            "c_t_estimate": self.c_t_estimate,
            "mmd_proxy": self.mmd_proxy,
            "bound_rhs": self.bound_rhs,
        }

    def write_json(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def bound_report(
    stage1_model: MlpModel,
    source: LabeledDomain,
    target: UnlabeledDomain,
    pseudo: SoftLabels,
    probe_spec: MlpSpec,
    seed: int,
    *,
    trials: int = 3,
    probe_epochs: int = 60,
    mmd_cfg: MmdConfig = MmdConfig(),
) -> BoundReport:
    """Assemble the bound ingredients for a trained stage-1 model.

    bound_rhs = source_risk + mmd_proxy / 2 + c_t_estimate + rho, with the
    feature-space MMD standing in for the hypothesis-class divergence.
    """
    if target.hidden_labels is None:
        raise ValueError("bound_report needs a target with hidden labels")
    if len(pseudo) != len(target):
        raise ValueError(f"{len(pseudo)} pseudo rows for {len(target)} target rows")

    pseudo_hard = harden(pseudo)
    rho_val = rho(pseudo, target.hidden_labels)
    src_risk = risk_01(stage1_model, source.features, source.labels)
    tgt_risk = risk_01(stage1_model, target.features, target.hidden_labels)
    pseudo_risk = risk_01(stage1_model, target.features, pseudo_hard)
    src_feats = forward(stage1_model, source.features).features
    tgt_feats = forward(stage1_model, target.features).features
    proxy = mmd_value(src_feats, tgt_feats, mmd_cfg)
    ct = estimate_ct(
        source,
        target.features,
        pseudo_hard,
        probe_spec,
        trials=trials,
        seed=seed,
        epochs=probe_epochs,
    )
    return BoundReport(
        rho=rho_val,
        source_risk=src_risk,
        target_risk=tgt_risk,
        pseudo_target_risk=pseudo_risk,
        c_t_estimate=ct,
        mmd_proxy=proxy,
        bound_rhs=src_risk + 0.5 * proxy + ct + rho_val,
    )
