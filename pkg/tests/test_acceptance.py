"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.  The
trend criteria (5-8) share module-scoped trained fixtures on the standard
benchmark shift: 3 classes, 2-D, 30-degree rotation, 200 samples per class
per domain, noise 0.4, defaults everywhere, steep schedule, soft labels.
"""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

import shiftlab as sl
from shiftlab.cli import main as cli_main
from shiftlab.evaluation import predict
from shiftlab.losses import SoftLabels
from shiftlab.mlp import backward, forward
from shiftlab.numeric import Rng, finite_difference_gradient
from shiftlab.schedules import (
    FIXED_MECHANISMS,
    INCREMENT_MECHANISMS,
    LrSpec,
    ScheduleSpec,
    lambda_at,
    lr_at,
)
from shiftlab.training import harden

from util import (
    BENCHMARK_SEEDS,
    STAGE1_EPOCHS,
    away_from_relu_kink,
    brute_force_mmd,
    rel_err,
    run_benchmark_stage1,
    run_benchmark_stage2,
)

GRAD_TOL = 1e-5


def report(num: int, name: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    suffix = f" | {detail}" if detail else ""
    print(f"\nACCEPTANCE {num:02d} {name}: {status}{suffix}")
    return ok


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def benchmark_teachers():
    """Stage-1 models at full defaults, one per trial seed."""
    return {t: run_benchmark_stage1(t) for t in BENCHMARK_SEEDS}


@pytest.fixture(scope="module")
def steep_students(benchmark_teachers):
    """Default stage-2 students (steep schedule, soft labels) per trial."""
    out = {}
    for t, (src, tgt, teacher, _) in benchmark_teachers.items():
        out[t] = run_benchmark_stage2(src, tgt, teacher, t)
    return out


# ---------------------------------------------------------------- criteria

def test_c01_gradient_correctness():
    rng = Rng(31337)
    worst = 0.0

    for _ in range(20):  # cross-entropy
        n, c = 1 + rng.below(5), 2 + rng.below(5)
        z = rng.gaussian_matrix(n, c, scale=2.0)
        labels = np.array([rng.below(c) for _ in range(n)])
        _, analytic = sl.cross_entropy(z, labels)
        fd = finite_difference_gradient(lambda m: sl.cross_entropy(m, labels)[0], z)
        worst = max(worst, rel_err(fd, analytic))

    for _ in range(20):  # distillation KL
        n, c = 1 + rng.below(5), 2 + rng.below(5)
        z = rng.gaussian_matrix(n, c, scale=2.0)
        teacher = SoftLabels(sl.softmax(rng.gaussian_matrix(n, c, scale=2.0), 2.0))
        tau = 0.5 + rng.uniform() * 3.0
        _, analytic = sl.kl_distill(z, teacher, tau)
        fd = finite_difference_gradient(lambda m: sl.kl_distill(m, teacher, tau)[0], z)
        worst = max(worst, rel_err(fd, analytic))

    cfg = sl.MmdConfig(bandwidths=(0.5, 1.0, 2.0))
    for _ in range(20):  # MMD, both sides
        m, n, d = 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(4)
        s = rng.gaussian_matrix(m, d)
        t = rng.gaussian_matrix(n, d)
        _, ds, dt = sl.mmd(s, t, cfg)
        worst = max(worst, rel_err(finite_difference_gradient(lambda p: sl.mmd(p, t, cfg)[0], s), ds))
        worst = max(worst, rel_err(finite_difference_gradient(lambda p: sl.mmd(s, p, cfg)[0], t), dt))

    checked = 0  # full model backward, composite loss with feature-level term
    while checked < 20:
        dims = (1 + rng.below(4), 1 + rng.below(5))
        spec = sl.MlpSpec(2 + rng.below(3), dims, 2 + rng.below(3), init_seed=rng.next_uint64())
        model = sl.init_model(spec)
        batch = 2 + rng.below(4)
        x = rng.gaussian_matrix(batch, spec.input_dim)
        if not away_from_relu_kink(model, x):
            continue
        labels = np.array([rng.below(spec.num_classes) for _ in range(batch)])
        anchor = rng.gaussian_matrix(batch, dims[-1])

        def loss_at(probe) -> float:
            trace = forward(probe, x)
            ce, _ = sl.cross_entropy(trace.logits, labels)
            align, _, _ = sl.mmd(trace.features, anchor, cfg)
            return ce + align

        trace = forward(model, x)
        _, d_logits = sl.cross_entropy(trace.logits, labels)
        _, d_feats, _ = sl.mmd(trace.features, anchor, cfg)
        grads = backward(model, trace, d_logits, d_feats)
        for layer in range(model.num_layers):
            def f_w(p, layer=layer):
                probe = model.copy()
                probe.weights[layer] = p
                return loss_at(probe)

            def f_b(p, layer=layer):
                probe = model.copy()
                probe.biases[layer] = p.ravel()
                return loss_at(probe)

            worst = max(worst, rel_err(
                finite_difference_gradient(f_w, model.weights[layer]), grads.weights[layer]))
            worst = max(worst, rel_err(
                finite_difference_gradient(f_b, model.biases[layer].reshape(1, -1)),
                grads.biases[layer].reshape(1, -1)))
        checked += 1

    ok = worst <= GRAD_TOL
    report(1, "gradient-correctness", ok, f"worst rel err {worst:.2e} (tol {GRAD_TOL:.0e})")
    assert ok


def test_c02_schedule_closed_forms():
    cases = [
        ("steep_exp_increment", 0.0, 0.0),
        ("steep_exp_increment", 0.5, 0.986614),
        ("steep_exp_increment", 1.0, 0.9999092),
        ("step_exp_decrement", 0.0, 1.0),
        ("flat_exp_increment", 1.0, 1.0),
        ("cosine", 0.5, 0.292893),
    ]
    worst = 0.0
    for mechanism, r, expected in cases:
        worst = max(worst, abs(lambda_at(ScheduleSpec(mechanism=mechanism), r) - expected))
    grid = [i / 1000 for i in range(1001)]
    monotone = True
    in_range = True
    for mechanism in INCREMENT_MECHANISMS:
        values = [lambda_at(ScheduleSpec(mechanism=mechanism), r) for r in grid]
        monotone &= all(b >= a for a, b in zip(values, values[1:]))
        in_range &= min(values) >= -1e-12 and max(values) <= 1.0 + 1e-12
    dec = [lambda_at(ScheduleSpec(mechanism="step_exp_decrement"), r) for r in grid]
    monotone &= all(b <= a for a, b in zip(dec, dec[1:]))
    in_range &= min(dec) >= -1e-12 and max(dec) <= 1.0 + 1e-12
    for mechanism in FIXED_MECHANISMS:
        values = [lambda_at(ScheduleSpec(mechanism=mechanism), r) for r in grid]
        in_range &= min(values) >= -1e-12 and max(values) <= 1.0 + 1e-12
    lr_err = abs(lr_at(LrSpec(), 1.0) - 0.0016556)
    ok = worst <= 1e-6 and monotone and in_range and lr_err <= 1e-6
    report(2, "schedule-closed-forms", ok,
           f"max lambda err {worst:.2e}, lr err {lr_err:.2e}, monotone={monotone}")
    assert ok


def test_c03_triangle_step_exactness():
    # 64 samples: every 0/1 risk is an exact dyadic, so the inequality is
    # checked with zero tolerance.
    rng = Rng(2718)
    n = 64
    feats = rng.gaussian_matrix(n, 2, scale=3.0)
    violations = 0
    for _ in range(50):
        model = sl.init_model(sl.MlpSpec(2, (5,), 3, init_seed=rng.next_uint64()))
        preds = predict(model, feats)
        truth = np.array([rng.below(3) for _ in range(n)])
        for _ in range(50):
            probs = sl.softmax(rng.gaussian_matrix(n, 3, scale=3.0))
            pseudo = SoftLabels(probs)
            r_true = float((preds != truth).mean())
            r_pseudo = float((preds != harden(pseudo)).mean())
            if abs(r_pseudo - r_true) > sl.rho(pseudo, truth):
                violations += 1
    ok = violations == 0
    report(3, "pseudo-risk-triangle-step", ok, f"{violations} violations in 2500 checks")
    assert ok


def test_c04_mmd_oracle_equivalence():
    rng = Rng(1618)
    cfg = sl.MmdConfig()
    worst = 0.0
    for _ in range(20):
        m, n, d = 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(4)
        s = rng.gaussian_matrix(m, d, scale=1.5)
        t = rng.gaussian_matrix(n, d, scale=1.5)
        value, _, _ = sl.mmd(s, t, cfg)
        worst = max(worst, abs(value - brute_force_mmd(s, t, cfg.bandwidths)))
    x = rng.gaussian_matrix(5, 3)
    identical_zero = sl.mmd(x, x.copy(), cfg)[0] == 0.0
    nonneg = True
    for _ in range(100):
        s = rng.gaussian_matrix(1 + rng.below(6), 2, scale=2.0)
        t = rng.gaussian_matrix(1 + rng.below(6), 2, scale=2.0)
        nonneg &= sl.mmd(s, t, cfg)[0] >= 0.0
    ok = worst <= 1e-12 and identical_zero and nonneg
    report(4, "mmd-oracle-equivalence", ok,
           f"max oracle gap {worst:.2e}, identical-zero={identical_zero}, nonneg={nonneg}")
    assert ok


def test_c05_stage2_improvement(benchmark_teachers, steep_students):
    # NOTE: at this benchmark the 30-degree rotation leaves every target
    # cluster about five noise standard deviations from the nearest decision
    # boundary, so the aligned stage-1 model reaches 100% target accuracy on
    # every seed and stage 2 can only tie it.  The >= clause holds, but a
    # strictly positive mean improvement is unattainable at this geometry;
    # the assertion is kept as stated rather than weakened.
    s1 = [benchmark_teachers[t][3] for t in BENCHMARK_SEEDS]
    s2 = [steep_students[t][1] for t in BENCHMARK_SEEDS]
    wins = sum(b >= a for a, b in zip(s1, s2))
    mean_improvement = float(np.mean([b - a for a, b in zip(s1, s2)]))
    ok = wins >= 4 and mean_improvement > 0.0
    report(5, "stage2-improvement", ok,
           f"stage2 >= stage1 in {wins}/5 seeds, mean improvement {mean_improvement:+.4f}")
    assert wins >= 4
    assert mean_improvement > 0.0


def test_c06_schedule_ordering(benchmark_teachers, steep_students):
    means = {"steep_exp_increment": float(np.mean([steep_students[t][1] for t in BENCHMARK_SEEDS]))}
    others = [m for m in INCREMENT_MECHANISMS if m != "steep_exp_increment"]
    for mechanism in (*others, *FIXED_MECHANISMS, "step_exp_decrement"):
        accs = []
        for t in BENCHMARK_SEEDS:
            src, tgt, teacher, _ = benchmark_teachers[t]
            accs.append(run_benchmark_stage2(src, tgt, teacher, t, mechanism=mechanism)[1])
        means[mechanism] = float(np.mean(accs))
    increment_mean = float(np.mean([means[m] for m in INCREMENT_MECHANISMS]))
    fixed_mean = float(np.mean([means[m] for m in FIXED_MECHANISMS]))
    steep_vs_dec = means["steep_exp_increment"] >= means["step_exp_decrement"]
    inc_vs_fixed = increment_mean >= fixed_mean
    ok = steep_vs_dec and inc_vs_fixed
    report(6, "schedule-ordering", ok,
           f"steep {means['steep_exp_increment']:.4f} vs decrement "
           f"{means['step_exp_decrement']:.4f}; increments {increment_mean:.4f} "
           f"vs fixed {fixed_mean:.4f}")
    assert ok


def test_c07_soft_vs_hard_labels():
    noisy_epochs = STAGE1_EPOCHS // 4
    means = {}
    for mode in ("soft", "hard"):
        accs = []
        for t in BENCHMARK_SEEDS:
            src, tgt, teacher, _ = run_benchmark_stage1(t, epochs=noisy_epochs)
            accs.append(run_benchmark_stage2(src, tgt, teacher, t, label_mode=mode)[1])
        means[mode] = float(np.mean(accs))
    ok = means["soft"] >= means["hard"]
    report(7, "soft-vs-hard-labels", ok, f"soft {means['soft']:.4f} vs hard {means['hard']:.4f}")
    assert ok


def test_c08_alignment_effect(benchmark_teachers):
    aligned = float(np.mean([benchmark_teachers[t][3] for t in BENCHMARK_SEEDS]))
    source_only = float(np.mean(
        [run_benchmark_stage1(t, align_weight=0.0)[3] for t in BENCHMARK_SEEDS]
    ))
    zero_shift_aligned = float(np.mean(
        [run_benchmark_stage1(t, rotation_deg=0.0)[3] for t in BENCHMARK_SEEDS]
    ))
    zero_shift_source_only = float(np.mean(
        [run_benchmark_stage1(t, align_weight=0.0, rotation_deg=0.0)[3] for t in BENCHMARK_SEEDS]
    ))
    gap = abs(zero_shift_aligned - zero_shift_source_only)
    ok = aligned >= source_only and gap <= 0.03
    report(8, "alignment-effect", ok,
           f"benchmark: aligned {aligned:.4f} vs source-only {source_only:.4f}; "
           f"zero-shift gap {gap:.4f}")
    assert ok


ACCEPT_RUN_CONFIG = """\
shift.per_class_count = 20
shift.noise_sigma = 0.5
shift.rotation_deg = 35
stage1.epochs = 8
stage1.hidden_dims = 16,8
stage2.epochs = 10
stage2.hidden_dims = 16,8
probe.hidden_dims = 8
probe.epochs = 8
probe.trials = 1
seeds = 0,1
"""


def test_c09_run_determinism(tmp_path):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(ACCEPT_RUN_CONFIG)
    dirs = [str(tmp_path / "a"), str(tmp_path / "b")]
    for out in dirs:
        assert cli_main(["run", "--config", str(cfg_path), "--out", out]) == 0
    compared = []
    identical = True
    names = ["summary.json"] + [
        f"seed_{s}/{n}" for s in (0, 1)
        for n in ("stage1.ckpt", "stage2.ckpt", "source.txt", "target.txt",
                  "soft_labels.txt", "stage1_report.csv", "stage2_report.csv", "bound.json")
    ]
    for name in names:
        a = open(os.path.join(dirs[0], name), "rb").read()
        b = open(os.path.join(dirs[1], name), "rb").read()
        compared.append(name)
        identical &= a == b
    ok = identical and len(compared) == 17
    report(9, "run-determinism", ok, f"{len(compared)} artifacts byte-compared")
    assert ok


def test_c10_bound_sanity(benchmark_teachers):
    src, tgt, teacher, _ = benchmark_teachers[BENCHMARK_SEEDS[0]]
    soft = sl.extract_soft_labels(teacher, tgt, 2.0)
    rep = sl.bound_report(teacher, src, tgt, soft, sl.MlpSpec(2, (16, 8), 3), seed=17,
                          trials=2, probe_epochs=40)
    within_rho = abs(rep.pseudo_target_risk - rep.target_risk) <= rep.rho + 1e-12
    bounded = rep.target_risk <= rep.bound_rhs
    ok = within_rho and bounded
    report(10, "bound-sanity", ok,
           f"target_risk {rep.target_risk:.4f} <= bound_rhs {rep.bound_rhs:.4f}; "
           f"|pseudo-true| {abs(rep.pseudo_target_risk - rep.target_risk):.4f} <= rho {rep.rho:.4f}")
    assert ok
