"""Diagnostics: error taxonomy, length-bucketed mIoU and ablation sweeps."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .metrics import EvalRecord, EvalReport, temporal_iou
from .types import Segment

DEFAULT_BUCKET_EDGES = (0.0, 5.0, 10.0, 20.0, 40.0, math.inf)
EXACT_TOL = 1e-9


class ErrorCategory(str, enum.Enum):
    NO_OVERLAP = "NoOverlap"
    PRED_INSIDE_GT = "PredInsideGT"
    GT_INSIDE_PRED = "GTInsidePred"
    PARTIAL_OVERLAP = "PartialOverlap"
    EXACT = "Exact"


def classify_error(pred: Segment, gt: Segment) -> ErrorCategory:
    """Place a prediction/ground-truth pair in exactly one error category."""
    iou = temporal_iou(pred, gt)
    if iou == 0.0:
        return ErrorCategory.NO_OVERLAP
    if iou >= 1.0 - EXACT_TOL:
        return ErrorCategory.EXACT
    if gt.start <= pred.start and pred.end <= gt.end:
        return ErrorCategory.PRED_INSIDE_GT
    if pred.start <= gt.start and gt.end <= pred.end:
        return ErrorCategory.GT_INSIDE_PRED
    return ErrorCategory.PARTIAL_OVERLAP


@dataclass(frozen=True)
class TaxonomyReport:
    counts: dict[str, int]
    miou: dict[str, float | None]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["category", "count", "miou"])
        for cat in ErrorCategory:
            m = self.miou[cat.value]
            w.writerow([cat.value, self.counts[cat.value], "" if m is None else repr(m)])
        return buf.getvalue()


def _best_pairs(records: Sequence[EvalRecord]) -> list[tuple[Segment | None, Segment]]:
    pairs = []
    for r in records:
        if len(r.spans) != 1:
            continue
        pairs.append((r.best_prediction(), r.spans[0]))
    return pairs


def taxonomy_report(records: Sequence[EvalRecord]) -> TaxonomyReport:
    """Counts and mean IoU per error category over single-GT records.

    A record without any prediction counts as ``NoOverlap``.
    """
    ious: dict[str, list[float]] = {c.value: [] for c in ErrorCategory}
    for pred, gt in _best_pairs(records):
        if pred is None:
            ious[ErrorCategory.NO_OVERLAP.value].append(0.0)
            continue
        cat = classify_error(pred, gt)
        ious[cat.value].append(0.0 if cat is ErrorCategory.NO_OVERLAP else temporal_iou(pred, gt))
    counts = {k: len(v) for k, v in ious.items()}
    miou = {k: (float(np.mean(v)) if v else None) for k, v in ious.items()}
    return TaxonomyReport(counts, miou)


@dataclass(frozen=True)
class Bucket:
    low: float
    high: float
    count: int
    miou: float | None  # None marks an empty bucket


def length_bucketed_miou(
    records: Sequence[EvalRecord], bucket_edges: Sequence[float] = DEFAULT_BUCKET_EDGES
) -> list[Bucket]:
    """Group records by ground-truth duration into ``[low, high)`` buckets."""
    edges = list(bucket_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly increasing with at least two entries")
    groups: list[list[float]] = [[] for _ in edges[:-1]]
    for pred, gt in _best_pairs(records):
        iou = 0.0 if pred is None else temporal_iou(pred, gt)
        for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
            if lo <= gt.duration < hi:
                groups[i].append(iou)
                break
    return [
        Bucket(lo, hi, len(g), float(np.mean(g)) if g else None)
        for (lo, hi), g in zip(zip(edges, edges[1:]), groups)
    ]


def buckets_to_csv(buckets: Sequence[Bucket]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bucket_low", "bucket_high", "count", "miou"])
    for b in buckets:
        w.writerow([repr(b.low), repr(b.high), b.count, "" if b.miou is None else repr(b.miou)])
    return buf.getvalue()


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered uniform window with mirrored edges. ``window`` must be odd."""
    x = np.asarray(values, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError("moving-average window must be a positive odd integer")
    if window == 1:
        return x.copy()
    from .sgfilter import derive_kernel, smooth_array

    return smooth_array(x, derive_kernel(window // 2, 0), "mirror")


def exponential_average(values: np.ndarray, window: int) -> np.ndarray:
    """One-sided recursive average with factor ``2 / (window + 1)``."""
    x = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("exponential-average window must be >= 1")
    a = 2.0 / (window + 1)
    out = np.empty_like(x)
    acc = x[0]
    for t, v in enumerate(x):
        acc = v if t == 0 else a * v + (1 - a) * acc
        out[t] = acc
    return out


@dataclass(frozen=True)
class SmoothingStrategy:
    """``kind`` in {none, moving_average, exponential, savitzky_golay}."""

    kind: str
    window: int = 5
    poly_order: int = 2

    @property
    def name(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "savitzky_golay":
            return f"savitzky_golay(k={self.window},p={self.poly_order})"
        return f"{self.kind}(w={self.window})"

    @classmethod
    def parse(cls, text: str) -> "SmoothingStrategy":
        """Parse ``none``, ``ma:5``, ``ema:5`` or ``sg:5:2``."""
        parts = text.strip().split(":")
        kind = {"none": "none", "ma": "moving_average", "ema": "exponential", "sg": "savitzky_golay"}.get(parts[0])
        if kind is None:
            raise ValueError(f"unknown smoothing strategy {text!r}")
        nums = [int(p) for p in parts[1:]]
        if kind == "none":
            return cls("none")
        if kind == "savitzky_golay":
            return cls(kind, nums[0] if nums else 5, nums[1] if len(nums) > 1 else 2)
        return cls(kind, nums[0] if nums else 5)


def smoothing_ablation(records, base_cfg, strategies: Sequence[SmoothingStrategy], params=None, threads: int = 1) -> dict[str, EvalReport]:
    """Re-run the pipeline once per smoothing strategy, everything else fixed."""
    from .pipeline import run_pipeline

    out = {}
    for strat in strategies:
        cfg = replace(base_cfg, smoothing=strat.kind, sg_half_window=strat.window, sg_order=strat.poly_order, smooth_window=strat.window)
        out[strat.name] = run_pipeline(records, cfg, params=params, threads=threads).report
    return out


def aggregation_ablation(records, base_cfg, strategies: Sequence[str] = ("average", "max", "median"), params=None, threads: int = 1) -> dict[str, EvalReport]:
    """Re-run the pipeline once per layer-aggregation strategy."""
    from .pipeline import run_pipeline

    return {
        s: run_pipeline(records, replace(base_cfg, aggregation=s), params=params, threads=threads).report
        for s in strategies
    }
