"""Desk-scale laboratory for two-stage unsupervised domain adaptation.

Stage 1 trains an MMD-aligned classifier on a labeled source domain and an
unlabeled target domain; its temperature-softened target predictions become
frozen soft labels.  Stage 2 distills those labels into a fresh network
under a curriculum that shifts the loss from source cross-entropy toward
target distillation as training progresses.  Evaluation utilities measure
pseudo-label inaccuracy, empirical risks, and a proxy upper bound on target
risk.  Everything is deterministic given the configured seeds.
"""

from ._kernels import BACKEND_NAME, available_backends
from .config import ExperimentConfig, build_experiment_config, load_experiment_config
from .datasets import LabeledDomain, ShiftSpec, UnlabeledDomain, generate_pair
from .evaluation import BoundReport, accuracy, bound_report, estimate_ct, rho, risk_01
from .experiment import emit_curves, run_experiment, run_sweep
from .losses import MmdConfig, SoftLabels, cross_entropy, kl_distill, mmd, softmax
from .mlp import MlpModel, MlpSpec, forward, init_model, load_checkpoint, save_checkpoint
from .numeric import Rng, finite_difference_gradient, matmul
from .schedules import LrSpec, ScheduleSpec, blend_weights, lambda_at, lr_at
from .training import (
    Stage1Config,
    Stage2Config,
    extract_soft_labels,
    harden,
    train_stage1,
    train_stage2,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "BoundReport",
    "ExperimentConfig",
    "LabeledDomain",
    "LrSpec",
    "MlpModel",
    "MlpSpec",
    "MmdConfig",
    "Rng",
    "ScheduleSpec",
    "ShiftSpec",
    "SoftLabels",
    "Stage1Config",
    "Stage2Config",
    "UnlabeledDomain",
    "accuracy",
    "available_backends",
    "blend_weights",
    "bound_report",
    "build_experiment_config",
    "cross_entropy",
    "emit_curves",
    "estimate_ct",
    "extract_soft_labels",
    "finite_difference_gradient",
    "forward",
    "generate_pair",
    "harden",
    "init_model",
    "kl_distill",
    "lambda_at",
    "load_checkpoint",
    "load_experiment_config",
    "lr_at",
    "matmul",
    "mmd",
    "rho",
    "risk_01",
    "run_experiment",
    "run_sweep",
    "save_checkpoint",
    "softmax",
    "train_stage1",
    "train_stage2",
]
