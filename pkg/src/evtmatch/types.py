"""Value types shared across modules. All are immutable after construction."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

SQUASH_MODES = ("none", "softmax", "shifted")


@dataclass(frozen=True, order=True)
class Segment:
    """Closed time interval in seconds. ``start == end`` marks a highlight timestamp."""

    start: float
    end: float

    def __post_init__(self):
        s, e = float(self.start), float(self.end)
        if not (np.isfinite(s) and np.isfinite(e)):
            raise ValueError(f"segment bounds must be finite, got ({s}, {e})")
        if s < 0:
            raise ValueError(f"segment start must be >= 0, got {s}")
        if e < s:
            raise ValueError(f"segment end {e} precedes start {s}")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def duration(self) -> float:
        return self.end - self.start

    def as_list(self) -> list[float]:
        return [self.start, self.end]


@dataclass(frozen=True)
class SegmentSet:
    """Sorted, pairwise-disjoint segments."""

    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        segs = tuple(self.segments)
        for a, b in zip(segs, segs[1:]):
            if b.start < a.start:
                raise ValueError("segments must be sorted by start")
            if b.start < a.end:
                raise ValueError(f"segments overlap: {a} and {b}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def of(cls, pairs: Sequence[Sequence[float]]) -> "SegmentSet":
        return cls(tuple(Segment(s, e) for s, e in pairs))

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, i: int) -> Segment:
        return self.segments[i]

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True, eq=False)
class ScoreTrack:
    """Per-frame similarity scores for one query.

    ``squash`` records which transform produced the values (``"none"`` for raw
    cosine similarities).
    """

    scores: np.ndarray
    fps: float
    squash: str = "none"
    smoothed: bool = False
    temperature: float | None = field(default=None)

    def __post_init__(self):
        arr = np.array(self.scores, dtype=np.float64, copy=True).reshape(-1)
        if arr.shape[0] < 1:
            raise ValueError("score track must contain at least one frame")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.squash not in SQUASH_MODES:
            raise ValueError(f"unknown squash mode {self.squash!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def normalized(self) -> bool:
        return self.squash != "none"

    def __len__(self) -> int:
        return self.scores.shape[0]

    def with_scores(self, scores, **changes) -> "ScoreTrack":
        return replace(self, scores=scores, **changes)
