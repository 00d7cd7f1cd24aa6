"""Smoothed binary ground-truth labels and the seconds/frames convention.

Frame ``i`` covers the half-open interval ``[i/fps, (i+1)/fps)``. A segment
``(start, end)`` in seconds therefore maps to frames
``floor(start*fps) .. ceil(end*fps) - 1``; a zero-length highlight maps to the
single frame nearest to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .types import Segment, SegmentSet

DEFAULT_ALPHA = 2.0
DEFAULT_HALO = 3

# products like 0.3 * 10 land a few ulps off the integer grid
_GRID_TOL = 1e-9


def _snap(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < _GRID_TOL else x


@dataclass(frozen=True, eq=False)
class LabelVector:
    values: np.ndarray
    fps: float
    alpha: float

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]


def seconds_to_frames(seg: Segment, fps: float, num_frames: int) -> tuple[int, int]:
    """Map a segment in seconds to an inclusive ``(start_idx, end_idx)`` pair.

    >>> seconds_to_frames(Segment(3.2, 7.8), fps=1, num_frames=20)
    (3, 7)
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    last = num_frames - 1
    if seg.start == seg.end:
        idx = math.floor(_snap(seg.start * fps) + 0.5)
        idx = min(max(idx, 0), last)
        return idx, idx
    lo = math.floor(_snap(seg.start * fps))
    hi = math.ceil(_snap(seg.end * fps)) - 1
    lo = min(max(lo, 0), last)
    hi = min(max(hi, 0), last)
    return lo, hi


def frames_to_seconds(start_idx: int, end_idx: int, fps: float) -> Segment:
    """Inverse convention: frames ``start_idx..end_idx`` span ``[start/fps, (end+1)/fps]``."""
    if not 0 <= start_idx <= end_idx:
        raise ValueError(f"need 0 <= start_idx <= end_idx, got ({start_idx}, {end_idx})")
    return Segment(start_idx / fps, (end_idx + 1) / fps)


def _span_labels(start: int, end: int, num_frames: int, alpha: float, halo: int) -> np.ndarray:
    t = np.arange(num_frames)
    dist = np.minimum(np.abs(t - start), np.abs(t - end))
    y = np.where(dist <= halo, float(alpha) ** -dist.astype(np.float64), 0.0)
    y[(t >= start) & (t <= end)] = 1.0
    return y


def build_labels_from_frames(
    spans: Iterable[tuple[int, int]],
    num_frames: int,
    alpha: float = DEFAULT_ALPHA,
    halo: int = DEFAULT_HALO,
    fps: float = 1.0,
) -> LabelVector:
    """Labels for inclusive frame spans; several spans combine by element-wise max."""
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if halo < 0:
        raise ValueError(f"halo width must be >= 0, got {halo}")
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    y = np.zeros(num_frames, dtype=np.float64)
    for s, e in spans:
        if not 0 <= s <= e <= num_frames - 1:
            raise ValueError(f"frame span ({s}, {e}) outside [0, {num_frames - 1}]")
        y = np.maximum(y, _span_labels(s, e, num_frames, alpha, halo))
    return LabelVector(y, fps, float(alpha))


def build_labels(
    gt: SegmentSet | Sequence[Segment],
    num_frames: int,
    fps: float,
    alpha: float = DEFAULT_ALPHA,
    halo: int = DEFAULT_HALO,
) -> LabelVector:
    """Smoothed binary labels for ground-truth segments given in seconds.

    Frames inside a span get 1, frames ``d <= halo`` frames away get
    ``alpha**-d``, everything else 0.

    Raises:
        ValueError: if a segment lies entirely outside the video or ``alpha < 1``.
    """
    spans = []
    for seg in gt:
        first = math.floor(_snap(seg.start * fps) + (0.5 if seg.start == seg.end else 0.0))
        if first > num_frames - 1:
            raise ValueError(
                f"segment ({seg.start}, {seg.end}) lies outside the {num_frames}-frame video"
            )
        spans.append(seconds_to_frames(seg, fps, num_frames))
    return build_labels_from_frames(spans, num_frames, alpha, halo, fps)
