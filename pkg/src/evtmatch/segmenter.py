"""Threshold segmentation of score tracks into predicted time segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .labels import frames_to_seconds, seconds_to_frames
from .types import ScoreTrack, Segment, SegmentSet

DEFAULT_SIGMA = 1e-5
FALLBACKS = ("peak", "none")


@dataclass(frozen=True)
class ExtractionConfig:
    sigma: float = DEFAULT_SIGMA
    min_duration: float = 0.0
    fallback: str = "peak"
    merge_gap: int = 0

    def __post_init__(self):
        if self.min_duration < 0:
            raise ValueError("min_duration must be >= 0")
        if self.merge_gap < 0:
            raise ValueError("merge_gap must be >= 0")
        if self.fallback not in FALLBACKS:
            raise ValueError(f"unknown fallback {self.fallback!r}")


def frame_runs(scores: np.ndarray, cfg: ExtractionConfig) -> list[tuple[int, int]]:
    """Inclusive frame runs after merging and duration filtering."""
    runs = kernels.threshold_runs(np.ascontiguousarray(scores, dtype=np.float64), float(cfg.sigma))
    merged: list[tuple[int, int]] = []
    for s, e in runs.tolist():
        if merged and s - merged[-1][1] - 1 <= cfg.merge_gap:
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return merged


def extract(track: ScoreTrack, cfg: ExtractionConfig = ExtractionConfig()) -> SegmentSet:
    """Segments covering maximal runs of frames scoring strictly above ``cfg.sigma``.

    Runs separated by at most ``merge_gap`` sub-threshold frames are joined and
    segments shorter than ``min_duration`` seconds are dropped. With
    ``fallback="peak"`` an empty result becomes the single argmax frame.
    """
    segs = []
    for s, e in frame_runs(track.scores, cfg):
        seg = frames_to_seconds(s, e, track.fps)
        if seg.duration >= cfg.min_duration:
            segs.append(seg)
    if not segs and cfg.fallback == "peak":
        peak = int(np.argmax(track.scores))
        segs.append(frames_to_seconds(peak, peak, track.fps))
    return SegmentSet(tuple(segs))


def mean_score(seg: Segment, track: ScoreTrack) -> float:
    lo, hi = seconds_to_frames(seg, track.fps, len(track))
    return float(np.mean(track.scores[lo : hi + 1]))


def rank_key(seg: Segment, score: float) -> tuple[float, float, float]:
    # highest score, then earliest start, then longest duration
    return (-score, seg.start, -seg.duration)


def top_segment(segments: SegmentSet, track: ScoreTrack) -> Segment:
    """The segment with the greatest mean frame score."""
    if len(segments) == 0:
        raise ValueError("cannot pick a top segment from an empty set")
    return min(segments, key=lambda seg: rank_key(seg, mean_score(seg, track)))


def highlight_peaks(track: ScoreTrack, max_count: int = 1) -> list[tuple[float, float]]:
    """Local maxima as ``(timestamp, score)`` pairs, best first.

    A frame is a peak when its left neighbour is strictly lower and its right
    neighbour is not higher, so a plateau reports its first frame. Timestamps
    sit at frame centres, ``(frame + 0.5) / fps``.
    """
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    s = track.scores
    idx = kernels.local_maxima(np.ascontiguousarray(s)).tolist()
    idx.sort(key=lambda t: (-s[t], t))
    return [((t + 0.5) / track.fps, float(s[t])) for t in idx[:max_count]]
