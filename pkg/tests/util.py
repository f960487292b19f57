"""Shared test helpers: gradient checking, brute-force oracles, benchmark runs."""

from __future__ import annotations

import numpy as np

import shiftlab as sl
from shiftlab.evaluation import make_eval_hook
from shiftlab.numeric import Rng, derive_seed, finite_difference_gradient


def rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    """Max absolute difference over the max magnitude of the exact value."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = max(np.abs(exact).max(), 1e-8)
    return float(np.abs(approx - exact).max() / scale)


def random_matrix(rng: Rng, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
    return rng.gaussian_matrix(rows, cols, scale=scale)


def away_from_relu_kink(model: sl.MlpModel, x: np.ndarray, margin: float = 1e-3) -> bool:
    """True when no hidden pre-activation sits within `margin` of zero, where
    finite differences of a ReLU network stop matching the subgradient."""
    trace = sl.forward(model, x)
    return all(np.abs(z).min() > margin for z in trace.pre_activations)


def brute_force_mmd(s: np.ndarray, t: np.ndarray, bandwidths) -> float:
    """O(n^2 d) double-loop oracle for the biased multi-bandwidth MMD^2."""
    m, n = len(s), len(t)
    total = 0.0
    for sigma in bandwidths:
        acc_ss = 0.0
        for i in range(m):
            for j in range(m):
                acc_ss += np.exp(-np.sum((s[i] - s[j]) ** 2) / (2 * sigma**2))
        acc_tt = 0.0
        for i in range(n):
            for j in range(n):
                acc_tt += np.exp(-np.sum((t[i] - t[j]) ** 2) / (2 * sigma**2))
        acc_st = 0.0
        for i in range(m):
            for j in range(n):
                acc_st += np.exp(-np.sum((s[i] - t[j]) ** 2) / (2 * sigma**2))
        total += acc_ss / m**2 + acc_tt / n**2 - 2.0 * acc_st / (m * n)
    return total


def fd_check(f, x: np.ndarray, analytic: np.ndarray, tol: float = 1e-5, h: float = 1e-5) -> float:
    err = rel_err(finite_difference_gradient(f, x, h), analytic)
    assert err <= tol, f"finite-difference mismatch: rel err {err:.3e} > {tol:.0e}"
    return err


# --- benchmark configuration shared by trend tests and the acceptance suite ---

BENCHMARK_SEEDS = (0, 1, 2, 3, 4)
STAGE1_EPOCHS = 100
STAGE2_EPOCHS = 200


def benchmark_shift(trial: int, rotation_deg: float = 30.0) -> sl.ShiftSpec:
    return sl.ShiftSpec(
        num_classes=3,
        dim=2,
        per_class_count=200,
        rotation_deg=rotation_deg,
        noise_sigma=0.4,
        seed=derive_seed(0, trial, 1),
    )


def benchmark_model_spec(init_seed: int) -> sl.MlpSpec:
    return sl.MlpSpec(2, (64, 32), 3, init_seed=init_seed)


def run_benchmark_stage1(
    trial: int,
    epochs: int = STAGE1_EPOCHS,
    align_weight: float = 1.0,
    rotation_deg: float = 30.0,
):
    """(source, target, teacher, final stage-1 target accuracy) for one trial."""
    source, target = sl.generate_pair(benchmark_shift(trial, rotation_deg))
    cfg = sl.Stage1Config(
        model_spec=benchmark_model_spec(derive_seed(0, trial, 2)),
        epochs=epochs,
        align_weight=align_weight,
        seed=derive_seed(0, trial, 3),
    )
    teacher, report = sl.train_stage1(source, target, cfg, eval_hook=make_eval_hook(source, target))
    return source, target, teacher, report.records[-1].target_acc


def run_benchmark_stage2(
    source,
    target,
    teacher,
    trial: int,
    mechanism: str = "steep_exp_increment",
    label_mode: str = "soft",
):
    """(student, final stage-2 target accuracy) for one trial."""
    cfg = sl.Stage2Config(
        model_spec=benchmark_model_spec(derive_seed(0, trial, 4)),
        schedule=sl.ScheduleSpec(mechanism=mechanism),
        label_mode=label_mode,
        epochs=STAGE2_EPOCHS,
        seed=derive_seed(0, trial, 5),
    )
    student, report = sl.train_stage2(
        source, target, teacher, cfg, eval_hook=make_eval_hook(source, target)
    )
    return student, report.records[-1].target_acc
