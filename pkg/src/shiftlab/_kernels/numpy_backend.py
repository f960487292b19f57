"""Pure-numpy kernels, semantically identical to the compiled core.

Both backends accumulate over the inner dimension in ascending order with
separate multiply and add, so for the same inputs they return the same bits.
Validation lives in the callers; inputs here are assumed C-contiguous float64.
"""

import numpy as np


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense product a @ b with left-to-right accumulation over the inner dim."""
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    for t in range(k):
        out += a[:, t, None] * b[t]
    return out


def pairwise_sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between all row pairs, accumulated over dims."""
    m, d = x.shape
    n = y.shape[0]
    out = np.zeros((m, n), dtype=np.float64)
    for t in range(d):
        diff = x[:, t, None] - y[None, :, t]
        out += diff * diff
    return out
