# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for dense matrix products and pairwise distances.

Accumulation order is pinned (ascending inner index, mul then add, no FMA)
so results are bit-identical to the numpy fallback in ``numpy_backend``.
"""

import numpy as np


def matmul(double[:, ::1] a, double[:, ::1] b):
    """Dense product a @ b with left-to-right accumulation over the inner dim."""
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t k = a.shape[1]
    cdef Py_ssize_t n = b.shape[1]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, t, j
    cdef double a_it
    for i in range(m):
        for t in range(k):
            a_it = a[i, t]
            for j in range(n):
                out[i, j] = out[i, j] + a_it * b[t, j]
    return out_arr


def pairwise_sqdist(double[:, ::1] x, double[:, ::1] y):
    """Squared Euclidean distances between all row pairs, accumulated over dims."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t n = y.shape[0]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, t, j
    cdef double x_it, diff
    for i in range(m):
        for t in range(d):
            x_it = x[i, t]
            for j in range(n):
                diff = x_it - y[j, t]
                out[i, j] = out[i, j] + diff * diff
    return out_arr
