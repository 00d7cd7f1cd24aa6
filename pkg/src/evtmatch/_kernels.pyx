# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``_kernels_py`` exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def correlate_valid(const double[::1] padded, const double[::1] coeffs):
    """``out[t] = sum_j coeffs[j] * padded[t + j]`` for every full window."""
    cdef Py_ssize_t n = padded.shape[0]
    cdef Py_ssize_t w = coeffs.shape[0]
    cdef Py_ssize_t m = n - w + 1
    cdef Py_ssize_t t, j
    cdef double acc
    if m <= 0:
        return np.empty(0, dtype=np.float64)
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for t in range(m):
            acc = 0.0
            for j in range(w):
                acc = acc + coeffs[j] * padded[t + j]
            o[t] = acc
    return out


def threshold_runs(const double[::1] scores, double sigma):
    """Inclusive ``(start, end)`` index pairs of maximal runs with score > sigma."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t t, k = 0, start = -1
    buf = np.empty((n // 2 + 1, 2), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] b = buf
    with nogil:
        for t in range(n):
            if scores[t] > sigma:
                if start < 0:
                    start = t
            elif start >= 0:
                b[k, 0] = start
                b[k, 1] = t - 1
                k = k + 1
                start = -1
        if start >= 0:
            b[k, 0] = start
            b[k, 1] = n - 1
            k = k + 1
    return buf[:k].copy()


def local_maxima(const double[::1] scores):
    """Indices whose left neighbour is strictly lower and right neighbour not higher."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t t, k = 0
    buf = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] b = buf
    with nogil:
        for t in range(n):
            if t > 0 and not (scores[t] > scores[t - 1]):
                continue
            if t < n - 1 and scores[t] < scores[t + 1]:
                continue
            b[k] = t
            k = k + 1
    return buf[:k].copy()


def pairwise_iou(const double[:, ::1] a, const double[:, ::1] b):
    """IoU matrix between two ``(n, 2)`` interval arrays.

    Zero-length intervals score 1 only against an identical point, else 0.
    """
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double lo, hi, inter, union
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                if a[i, 1] == a[i, 0] or b[j, 1] == b[j, 0]:
                    if a[i, 0] == b[j, 0] and a[i, 1] == b[j, 1]:
                        o[i, j] = 1.0
                    continue
                lo = a[i, 0] if a[i, 0] > b[j, 0] else b[j, 0]
                hi = a[i, 1] if a[i, 1] < b[j, 1] else b[j, 1]
                inter = hi - lo
                if inter <= 0.0:
                    continue
                union = (a[i, 1] - a[i, 0]) + (b[j, 1] - b[j, 0]) - inter
                o[i, j] = inter / union
    return out
