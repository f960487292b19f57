"""Deterministic numeric core: dense carriers, a portable RNG, and a
finite-difference gradient oracle.

Matrices are plain 2-D float64 numpy arrays.  All products go through
:func:`matmul`, which dispatches to the active kernel backend; accumulation
order is pinned there, so results do not depend on BLAS or platform.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import _kernels

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 2^-53: scales the top 53 bits of a word into [0, 1)
_UNIT = 1.0 / (1 << 53)
_TINY_UNIFORM = 2.0**-53


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 generator: a single 64-bit state, identical streams on
    every platform for the same seed."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_uint64(self) -> int:
        """Advance the state and return the next 64-bit word."""
        self.state = (self.state + _GAMMA) & MASK64
        return _finalize(self.state)

    def uniform(self) -> float:
        """Next float in [0, 1), from the top 53 bits of the next word."""
        return (self.next_uint64() >> 11) * _UNIT

    def gaussian(self) -> float:
        """Standard normal via Box-Muller on two uniform draws.

        An exact-zero first draw is substituted with 2^-53 so the log stays
        finite.  Each call consumes two words; the sine branch is discarded.
        """
        u1 = self.uniform()
        u2 = self.uniform()
        if u1 == 0.0:
            u1 = _TINY_UNIFORM
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def gaussian_matrix(self, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
        """rows x cols matrix of independent N(0, scale^2) draws, row-major order."""
        out = np.empty((rows, cols), dtype=np.float64)
        flat = out.ravel()
        for i in range(rows * cols):
            flat[i] = self.gaussian()
        if scale != 1.0:
            out *= scale
        return out

    def below(self, bound: int) -> int:
        """Next integer in [0, bound) by modulo reduction (bias is irrelevant
        at desk scale; determinism is what matters)."""
        return self.next_uint64() % bound

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def derive_seed(*parts: int) -> int:
    """Mix integers into one 64-bit seed (order-sensitive, deterministic).

    Used to fan a single trial seed out into independent sub-streams (data,
    init, shuffling, probes) without any two streams coinciding.
    """
    s = 0x243F6A8885A308D3
    for p in parts:
        s = _finalize((s + (p & MASK64)) & MASK64)
    return s


def as_matrix(x, name: str = "matrix", *, require_finite: bool = True) -> np.ndarray:
    """Coerce to a C-contiguous 2-D float64 array, optionally checking finiteness."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if require_finite and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _is_ready(arr) -> bool:
    return (
        type(arr) is np.ndarray
        and arr.dtype == np.float64
        and arr.ndim == 2
        and arr.flags.c_contiguous
    )


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense product with pinned left-to-right accumulation over the inner dim.

    Raises ValueError on incompatible shapes.
    """
    if not (_is_ready(a) and _is_ready(b)):
        a = np.ascontiguousarray(a, dtype=np.float64)
        b = np.ascontiguousarray(b, dtype=np.float64)
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"incompatible shapes for matmul: {a.shape} x {b.shape}")
    return _kernels.matmul(a, b)


def pairwise_sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances between rows of x and rows of y."""
    if not (_is_ready(x) and _is_ready(y)):
        x = np.ascontiguousarray(x, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError(f"pairwise_sqdist needs 2-D operands, got {x.shape} and {y.shape}")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"incompatible shapes for pairwise_sqdist: {x.shape} x {y.shape}")
    return _kernels.pairwise_sqdist(x, y)


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function, entry by entry.

    O(h^2) truncation error; the default step suits the 1e-5 relative
    tolerance used by the gradient checks.  Raises if any perturbed
    evaluation is non-finite, naming the offending entry.
    """
    if h <= 0:
        raise ValueError("finite difference step h must be > 0")
    x = as_matrix(x, "x")
    grad = np.empty_like(x)
    work = x.copy()
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            orig = work[i, j]
            work[i, j] = orig + h
            f_plus = float(f(work))
            work[i, j] = orig - h
            f_minus = float(f(work))
            work[i, j] = orig
            if not np.isfinite(f_plus) or not np.isfinite(f_minus):
                raise ValueError(
                    f"non-finite function value while perturbing entry ({i}, {j})"
                )
            grad[i, j] = (f_plus - f_minus) / (2.0 * h)
    return grad
