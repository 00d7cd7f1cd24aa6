"""Savitzky-Golay smoothing of 1-D score tracks.

Coefficients come from an exact least-squares polynomial fit: the normal
equations are solved with rational arithmetic, so symmetry and unit sum hold
to the last bit before the final conversion to float.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .types import ScoreTrack

MAX_POLY_ORDER = 6
EDGE_MODES = ("mirror", "replicate", "shrink")


@dataclass(frozen=True)
class SGKernel:
    half_window: int
    poly_order: int
    coefficients: tuple[float, ...]

    @property
    def window(self) -> int:
        return 2 * self.half_window + 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=np.float64)


def _solve_pivoted(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    n = len(rhs)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(aug[r][col]))
        if aug[pivot][col] == 0:
            raise ValueError("singular normal matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        for r in range(col + 1, n):
            factor = aug[r][col] / aug[col][col]
            if factor:
                for c in range(col, n + 1):
                    aug[r][c] -= factor * aug[col][c]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        acc = aug[r][n] - sum(aug[r][c] * x[c] for c in range(r + 1, n))
        x[r] = acc / aug[r][r]
    return x


@lru_cache(maxsize=None)
def exact_coefficients(half_window: int, poly_order: int) -> tuple[Fraction, ...]:
    """Center row of the least-squares smoothing matrix, as exact fractions."""
    k, p = half_window, poly_order
    if k < 0 or p < 0:
        raise ValueError("half_window and poly_order must be non-negative")
    if k == 0 and p > 0:
        raise ValueError("half_window 0 only supports poly_order 0")
    if p > 2 * k:
        raise ValueError(
            f"poly_order {p} > 2*half_window {2 * k}: fit is underdetermined"
        )
    if p > MAX_POLY_ORDER:
        raise ValueError(f"poly_order {p} exceeds the supported maximum {MAX_POLY_ORDER}")
    offsets = range(-k, k + 1)
    # normal matrix entries are power sums sum_i i^(r+c)
    moments = [sum(Fraction(i) ** e for i in offsets) for e in range(2 * p + 1)]
    normal = [[moments[r + c] for c in range(p + 1)] for r in range(p + 1)]
    e0 = [Fraction(1)] + [Fraction(0)] * p
    z = _solve_pivoted(normal, e0)
    return tuple(sum(z[j] * Fraction(i) ** j for j in range(p + 1)) for i in offsets)


def derive_kernel(half_window: int, poly_order: int = 2) -> SGKernel:
    """Derive the smoothing kernel for a ``2*half_window + 1`` point window.

    Raises:
        ValueError: if ``poly_order > 2*half_window`` or outside ``[0, 6]``.
    """
    exact = exact_coefficients(int(half_window), int(poly_order))
    return SGKernel(int(half_window), int(poly_order), tuple(float(c) for c in exact))


def _shrunk_value(x: np.ndarray, t: int, kernel: SGKernel) -> float:
    n = x.shape[0]
    k = min(t, n - 1 - t, kernel.half_window)
    p = min(kernel.poly_order, 2 * k)
    c = derive_kernel(k, p).as_array()
    return float(kernels.correlate_valid(np.ascontiguousarray(x[t - k : t + k + 1]), c)[0])


def smooth_array(values, kernel: SGKernel, edge_mode: str = "mirror") -> np.ndarray:
    """Smooth a 1-D array; see :func:`smooth` for the edge semantics."""
    if edge_mode not in EDGE_MODES:
        raise ValueError(f"unknown edge_mode {edge_mode!r}; expected one of {EDGE_MODES}")
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ValueError("track must be a non-empty 1-D sequence")
    n = x.shape[0]
    k = kernel.half_window
    if k == 0:
        return x.copy()
    coeffs = kernel.as_array()
    if n < kernel.window:
        edge_mode = "shrink"
    if edge_mode == "shrink":
        out = np.empty(n, dtype=np.float64)
        if n >= kernel.window:
            out[k : n - k] = kernels.correlate_valid(x, coeffs)
            edge = list(range(k)) + list(range(n - k, n))
        else:
            edge = range(n)
        for t in edge:
            out[t] = _shrunk_value(x, t, kernel)
        return out
    if edge_mode == "mirror":
        padded = np.pad(x, k, mode="reflect")
    else:
        padded = np.pad(x, k, mode="edge")
    return kernels.correlate_valid(np.ascontiguousarray(padded), coeffs)


def smooth(track: ScoreTrack, kernel: SGKernel, edge_mode: str = "mirror") -> ScoreTrack:
    """Apply the kernel to a score track, once.

    Interior samples ``k <= t < T-k`` are ``sum_i c_i * s[t+i]``. Near the
    edges, ``mirror`` reflects about the boundary sample, ``replicate``
    repeats it, and ``shrink`` re-derives a smaller symmetric kernel that fits
    inside the track. Tracks shorter than the window always use ``shrink``.
    """
    return track.with_scores(smooth_array(track.scores, kernel, edge_mode), smoothed=True)
