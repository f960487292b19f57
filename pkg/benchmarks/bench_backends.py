#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Times the two hot kernels at training-relevant shapes, plus one short
two-stage training run per backend, and verifies that results agree bit for
bit while reporting the speedup.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from shiftlab import (
    MlpSpec,
    ShiftSpec,
    Stage1Config,
    Stage2Config,
    generate_pair,
    train_stage1,
    train_stage2,
)
from shiftlab._kernels import available_backends, get_backend
from shiftlab.numeric import Rng

MATMUL_SHAPES = [(64, 2, 64), (64, 64, 32), (64, 32, 3), (600, 64, 32)]
SQDIST_SHAPES = [(32, 32, 32), (600, 600, 32)]


def time_call(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(repeats: int) -> None:
    rng = Rng(0)
    names = available_backends()
    print(f"backends: {', '.join(names)}\n")
    print(f"{'kernel':<28} " + " ".join(f"{n:>12}" for n in names) + f" {'speedup':>9}")
    for m, k, n in MATMUL_SHAPES:
        a = rng.gaussian_matrix(m, k)
        b = rng.gaussian_matrix(k, n)
        times = {}
        results = {}
        for name in names:
            backend = get_backend(name)
            times[name] = time_call(backend.matmul, a, b, repeats=repeats)
            results[name] = backend.matmul(a, b)
        _check_equal(results)
        _print_row(f"matmul {m}x{k}x{n}", times, names)
    for m, n, d in SQDIST_SHAPES:
        x = rng.gaussian_matrix(m, d)
        y = rng.gaussian_matrix(n, d)
        times = {}
        results = {}
        for name in names:
            backend = get_backend(name)
            times[name] = time_call(backend.pairwise_sqdist, x, y, repeats=repeats)
            results[name] = backend.pairwise_sqdist(x, y)
        _check_equal(results)
        _print_row(f"pairwise_sqdist {m}x{n}x{d}", times, names)


def _check_equal(results: dict) -> None:
    values = list(results.values())
    for other in values[1:]:
        assert np.array_equal(values[0], other), "backends disagree bitwise"


def _print_row(label: str, times: dict, names) -> None:
    cells = " ".join(f"{times[n] * 1e6:>10.1f}us" for n in names)
    if len(names) == 2:
        speedup = times["numpy"] / times["compiled"]
        print(f"{label:<28} {cells} {speedup:>8.1f}x")
    else:
        print(f"{label:<28} {cells}")


def bench_training() -> None:
    # Forcing a backend only works at import time, so this in-process pass
    # just reports the active backend's end-to-end cost at benchmark scale.
    spec = ShiftSpec(num_classes=3, dim=2, per_class_count=200, rotation_deg=30.0,
                     noise_sigma=0.4, seed=7)
    source, target = generate_pair(spec)
    start = time.perf_counter()
    cfg1 = Stage1Config(model_spec=MlpSpec(2, (64, 32), 3, init_seed=1), epochs=20, seed=2)
    teacher, _ = train_stage1(source, target, cfg1)
    mid = time.perf_counter()
    cfg2 = Stage2Config(model_spec=MlpSpec(2, (64, 32), 3, init_seed=3), epochs=40, seed=4)
    train_stage2(source, target, teacher, cfg2)
    end = time.perf_counter()
    from shiftlab._kernels import BACKEND_NAME

    print(f"\ntraining with {BACKEND_NAME} backend: "
          f"stage1 20 epochs {mid - start:.2f}s, stage2 40 epochs {end - mid:.2f}s")
    print("(set SHIFTLAB_BACKEND=numpy and rerun to compare end to end)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()
    bench_kernels(args.repeats)
    bench_training()


if __name__ == "__main__":
    main()
