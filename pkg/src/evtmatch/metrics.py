"""Grounding metrics: temporal IoU, R@tau, mIoU, segment F1, mAP and HIT@1.

Zero-length ground-truth segments (highlight timestamps) never enter the
IoU-based metrics; they are scored through :func:`hit_at_1` instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .segmenter import rank_key
from .types import Segment, SegmentSet

REPORT_FORMAT = "evtmatch-report v1"
RECALL_THRESHOLDS = (0.3, 0.5, 0.7)
MAP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
DEFAULT_SALIENCY_THRESHOLD = 4


@dataclass(frozen=True)
class EvalRecord:
    """One query's predictions against its ground truth.

    ``scores`` are per-prediction confidences aligned with ``predictions``.
    ``highlights`` are ``(timestamp, score)`` pairs and ``saliency`` holds one
    integer label per frame-sized clip.
    """

    query_id: str
    predictions: SegmentSet
    ground_truth: SegmentSet
    scores: tuple[float, ...] | None = None
    highlights: tuple[tuple[float, float], ...] | None = None
    saliency: tuple[int, ...] | None = None
    fps: float = 1.0

    def __post_init__(self):
        if not isinstance(self.predictions, SegmentSet):
            object.__setattr__(self, "predictions", SegmentSet(tuple(self.predictions)))
        if not isinstance(self.ground_truth, SegmentSet):
            object.__setattr__(self, "ground_truth", SegmentSet(tuple(self.ground_truth)))
        if self.scores is None:
            object.__setattr__(self, "scores", (1.0,) * len(self.predictions))
        else:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if len(self.scores) != len(self.predictions):
            raise ValueError(f"{self.query_id}: {len(self.scores)} scores for {len(self.predictions)} predictions")
        if len(self.ground_truth) == 0 and not self.saliency:
            raise ValueError(f"{self.query_id}: record needs ground-truth segments or saliency labels")

    @property
    def spans(self) -> tuple[Segment, ...]:
        """Ground-truth segments eligible for IoU metrics."""
        return tuple(s for s in self.ground_truth if s.duration > 0)

    def best_prediction(self) -> Segment | None:
        if len(self.predictions) == 0:
            return None
        ranked = sorted(zip(self.predictions, self.scores), key=lambda ps: rank_key(*ps))
        return ranked[0][0]


def temporal_iou(a: Segment, b: Segment) -> float:
    """Intersection over union on the real line.

    A zero-length segment scores 1 only against the identical point, else 0.
    """
    if a.duration == 0 or b.duration == 0:
        return 1.0 if (a.start, a.end) == (b.start, b.end) else 0.0
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0:
        return 0.0
    return inter / (a.duration + b.duration - inter)


def iou_matrix(preds: Sequence[Segment], gts: Sequence[Segment]) -> np.ndarray:
    a = np.array([[s.start, s.end] for s in preds], dtype=np.float64).reshape(-1, 2)
    b = np.array([[s.start, s.end] for s in gts], dtype=np.float64).reshape(-1, 2)
    return kernels.pairwise_iou(np.ascontiguousarray(a), np.ascontiguousarray(b))


def _grounding_records(records: Sequence[EvalRecord]) -> list[EvalRecord]:
    return [r for r in records if r.spans]


def best_ious(records: Sequence[EvalRecord]) -> list[float]:
    """IoU of each single-GT record's top prediction (0 when it has none)."""
    out = []
    for r in _grounding_records(records):
        if len(r.spans) != 1:
            raise ValueError(f"{r.query_id}: single-segment metrics need exactly one ground truth, got {len(r.spans)}")
        best = r.best_prediction()
        out.append(0.0 if best is None else temporal_iou(best, r.spans[0]))
    return out


def recall_at(records: Sequence[EvalRecord], threshold: float) -> float:
    ious = best_ious(records)
    if not ious:
        return 0.0
    return sum(1 for v in ious if v >= threshold) / len(ious)


def mean_iou(records: Sequence[EvalRecord]) -> float:
    ious = best_ious(records)
    return float(np.mean(ious)) if ious else 0.0


def greedy_match(iou: np.ndarray, threshold: float) -> list[tuple[int, int, float]]:
    """One-to-one matching taking pairs in descending IoU order.

    Ties are taken in (prediction, ground truth) index order.
    """
    n, m = iou.shape
    cand = [(-iou[i, j], i, j) for i in range(n) for j in range(m) if iou[i, j] >= threshold]
    cand.sort()
    used_p, used_g, matches = set(), set(), []
    for neg, i, j in cand:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, -neg))
    return matches


def record_f1(record: EvalRecord, iou_threshold: float = 0.5) -> float:
    preds, gts = list(record.predictions), list(record.spans)
    if not preds or not gts:
        return 0.0
    hits = len(greedy_match(iou_matrix(preds, gts), iou_threshold))
    if hits == 0:
        return 0.0
    precision, recall = hits / len(preds), hits / len(gts)
    return 2 * precision * recall / (precision + recall)


def segment_f1(records: Sequence[EvalRecord], iou_threshold: float = 0.5) -> float:
    """Mean per-record F1 under greedy one-to-one IoU matching."""
    recs = _grounding_records(records)
    if not recs:
        return 0.0
    return float(np.mean([record_f1(r, iou_threshold) for r in recs]))


def average_precision(records: Sequence[EvalRecord], threshold: float) -> float:
    """Detection AP pooled over all records at one IoU threshold.

    Within a record, predictions are taken by descending confidence (ties in
    prediction order) and each claims the unmatched ground truth with the
    highest IoU at or above ``threshold``. Precision/recall points are placed
    only at distinct confidence levels, so tied scores across records do not
    make the result depend on record order. Precision is made monotone from
    the right before integrating over recall.
    """
    recs = _grounding_records(records)
    n_gt = sum(len(r.spans) for r in recs)
    if n_gt == 0:
        return 0.0
    conf, hit = [], []
    for r in recs:
        iou = iou_matrix(list(r.predictions), list(r.spans))
        taken = np.zeros(len(r.spans), dtype=bool)
        for pi in sorted(range(len(r.predictions)), key=lambda i: (-r.scores[i], i)):
            row = iou[pi]
            tp = 0.0
            for j in np.argsort(-row, kind="stable"):
                if row[j] < threshold:
                    break
                if not taken[j]:
                    taken[j] = True
                    tp = 1.0
                    break
            conf.append(r.scores[pi])
            hit.append(tp)
    if not conf:
        return 0.0
    conf_arr = np.asarray(conf)
    order = np.argsort(-conf_arr, kind="stable")
    conf_arr = conf_arr[order]
    ctp = np.cumsum(np.asarray(hit)[order])
    # one point per distinct confidence: the last index of each tied block
    ends = np.flatnonzero(np.append(conf_arr[1:] != conf_arr[:-1], True))
    precision = ctp[ends] / (ends + 1)
    recall = ctp[ends] / n_gt
    mprec = np.concatenate(([0.0], precision, [0.0]))
    mrec = np.concatenate(([0.0], recall, [1.0]))
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mprec[steps]))


def map_over_thresholds(records: Sequence[EvalRecord], thresholds: Sequence[float] = MAP_THRESHOLDS) -> float:
    return float(np.mean([average_precision(records, t) for t in thresholds]))


def hit_at_1(records: Sequence[EvalRecord], saliency_threshold: float = DEFAULT_SALIENCY_THRESHOLD) -> float:
    """Share of records whose top-scored highlight lands on a salient clip."""
    recs = [r for r in records if r.saliency is not None or r.highlights is not None]
    if not recs:
        return 0.0
    hits = 0
    for r in recs:
        if not r.saliency:
            raise ValueError(f"{r.query_id}: HIT@1 needs ground-truth saliency labels")
        if not r.highlights:
            continue
        ts, _ = min(r.highlights, key=lambda h: (-h[1], h[0]))
        clip = min(max(int(np.floor(ts * r.fps)), 0), len(r.saliency) - 1)
        hits += r.saliency[clip] >= saliency_threshold
    return hits / len(recs)


@dataclass(frozen=True)
class EvalReport:
    metrics: dict[str, float]
    ious: tuple[float, ...]
    counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format": REPORT_FORMAT,
            "metrics": self.metrics,
            "counts": self.counts,
            "ious": list(self.ious),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        width = max([len(k) for k in self.metrics] + [len(k) for k in self.counts] + [6])
        lines = [f"{'metric':<{width}}  value", f"{'-' * width}  --------"]
        lines += [f"{k:<{width}}  {v:8.4f}" for k, v in self.metrics.items()]
        lines += [f"{k:<{width}}  {v:8d}" for k, v in self.counts.items()]
        return "\n".join(lines) + "\n"


def evaluate(
    records: Sequence[EvalRecord],
    recall_thresholds: Sequence[float] = RECALL_THRESHOLDS,
    f1_threshold: float = 0.5,
    map_thresholds: Sequence[float] = MAP_THRESHOLDS,
    saliency_threshold: float = DEFAULT_SALIENCY_THRESHOLD,
) -> EvalReport:
    """Compute every applicable metric for a batch of records.

    R@tau and mIoU are reported only when every grounding record has a single
    ground-truth segment; HIT@1 only when some record carries saliency labels.
    """
    grounding = _grounding_records(records)
    metrics: dict[str, float] = {}
    ious: list[float] = []
    if grounding and all(len(r.spans) == 1 for r in grounding):
        ious = best_ious(grounding)
        for t in recall_thresholds:
            metrics[f"R@{t:g}"] = sum(1 for v in ious if v >= t) / len(ious)
        metrics["mIoU"] = float(np.mean(ious))
    if grounding:
        metrics[f"F1@{f1_threshold:g}"] = segment_f1(grounding, f1_threshold)
        metrics["mAP"] = map_over_thresholds(grounding, map_thresholds)
    if any(r.saliency for r in records):
        metrics["HIT@1"] = hit_at_1(records, saliency_threshold)
    counts = {
        "records": len(records),
        "grounding_records": len(grounding),
        "empty_predictions": sum(1 for r in records if len(r.predictions) == 0),
    }
    return EvalReport(metrics, tuple(ious), counts)
