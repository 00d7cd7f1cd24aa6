"""Pure-Python/numpy fallback for the compiled inner loops in ``_kernels.pyx``."""

import numpy as np


def correlate_valid(padded, coeffs):
    padded = np.ascontiguousarray(padded, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    if padded.shape[0] < coeffs.shape[0]:
        return np.empty(0, dtype=np.float64)
    return np.correlate(padded, coeffs, mode="valid")


def threshold_runs(scores, sigma):
    above = np.asarray(scores, dtype=np.float64) > sigma
    if not above.any():
        return np.empty((0, 2), dtype=np.int64)
    edges = np.diff(np.concatenate(([0], above.view(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return np.stack([starts, ends], axis=1).astype(np.int64)


def local_maxima(scores):
    s = np.asarray(scores, dtype=np.float64)
    n = s.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    left = np.ones(n, dtype=bool)
    right = np.ones(n, dtype=bool)
    left[1:] = s[1:] > s[:-1]
    right[:-1] = s[:-1] >= s[1:]
    return np.flatnonzero(left & right).astype(np.int64)


def pairwise_iou(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    lo = np.maximum(a[:, None, 0], b[None, :, 0])
    hi = np.minimum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(hi - lo, 0.0, None)
    len_a = a[:, 1] - a[:, 0]
    len_b = b[:, 1] - b[:, 0]
    union = len_a[:, None] + len_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(inter > 0.0, inter / np.where(union > 0, union, 1.0), 0.0)
    point = (len_a[:, None] == 0) | (len_b[None, :] == 0)
    same = (a[:, None, 0] == b[None, :, 0]) & (a[:, None, 1] == b[None, :, 1])
    out = np.where(point, np.where(same, 1.0, 0.0), out)
    return np.ascontiguousarray(out)
