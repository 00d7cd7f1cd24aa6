"""End-to-end grounding: features or scores in, predictions and metrics out."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analysis
from .labels import DEFAULT_ALPHA, DEFAULT_HALO
from .matcher import AGGREGATIONS, DEFAULT_TEMPERATURE, aggregate_layers, cosine_track, project, squash_track
from .metrics import EvalRecord, EvalReport, evaluate
from .segmenter import DEFAULT_SIGMA, ExtractionConfig, extract, highlight_peaks, mean_score
from .sgfilter import EDGE_MODES, derive_kernel, smooth
from .trainer import MatchParams
from .types import SQUASH_MODES, ScoreTrack, SegmentSet

SMOOTHERS = ("none", "savitzky_golay", "moving_average", "exponential")
SWEEP_AXES = ("sigma", "alpha", "k", "smoothing", "aggregation")
CONFIG_FORMAT = "evtmatch-config v1"


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the inference pipeline.

    ``sg_half_window`` is read as the half-window (window ``2k+1``) when
    ``window_convention == "half"`` and as the full, odd window length when it
    is ``"full"``.
    """

    sigma: float = DEFAULT_SIGMA
    alpha: float = DEFAULT_ALPHA
    halo_width: int = DEFAULT_HALO
    smoothing: str = "savitzky_golay"
    sg_half_window: int = 5
    sg_order: int = 2
    window_convention: str = "half"
    smooth_window: int = 5
    edge_mode: str = "mirror"
    squash: str = "shifted"
    temperature: float = DEFAULT_TEMPERATURE
    aggregation: str = "average"
    layer_mask: tuple[bool, ...] | None = None
    merge_gap: int = 0
    min_duration: float = 0.0
    fallback: str = "peak"
    highlight_count: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.halo_width < 0:
            raise ValueError("halo_width must be >= 0")
        if self.smoothing not in SMOOTHERS:
            raise ValueError(f"smoothing must be one of {SMOOTHERS}")
        if self.window_convention not in ("half", "full"):
            raise ValueError("window_convention must be 'half' or 'full'")
        if self.window_convention == "full" and self.sg_half_window % 2 == 0:
            raise ValueError("a full window length must be odd")
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(f"edge_mode must be one of {EDGE_MODES}")
        if self.squash not in SQUASH_MODES:
            raise ValueError(f"squash must be one of {SQUASH_MODES}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.smooth_window < 1:
            raise ValueError("smooth_window must be >= 1")
        if self.layer_mask is not None:
            object.__setattr__(self, "layer_mask", tuple(bool(b) for b in self.layer_mask))
        if self.smoothing == "savitzky_golay":
            self.sg_kernel()
        self.extraction()

    @property
    def half_window(self) -> int:
        return self.sg_half_window if self.window_convention == "half" else self.sg_half_window // 2

    def sg_kernel(self):
        return derive_kernel(self.half_window, self.sg_order)

    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(self.sigma, self.min_duration, self.fallback, self.merge_gap)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if d["layer_mask"] is not None:
            d["layer_mask"] = list(d["layer_mask"])
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any], base: "RunConfig | None" = None) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k != "format"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        return replace(base or cls(), **d)


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    """Read a JSON config file; fields not present keep their ``base`` values."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    fmt = doc.get("format", CONFIG_FORMAT)
    if fmt != CONFIG_FORMAT:
        raise ValueError(f"{path}: expected format {CONFIG_FORMAT!r}, got {fmt!r}")
    return RunConfig.from_dict(doc, base)


@dataclass(frozen=True)
class Prediction:
    video_id: str
    query_id: str
    segments: SegmentSet
    scores: tuple[float, ...]
    highlights: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "query_id": self.query_id,
            "segments": [s.as_list() for s in self.segments],
            "scores": list(self.scores),
            "highlights": [list(h) for h in self.highlights],
        }


@dataclass(frozen=True)
class PipelineResult:
    report: EvalReport
    predictions: tuple[Prediction, ...]
    records: tuple[EvalRecord, ...]

    def predictions_jsonl(self) -> str:
        return "".join(json.dumps(p.to_dict()) + "\n" for p in self.predictions)


def raw_track(record, cfg: RunConfig, params: MatchParams | None) -> ScoreTrack:
    """Unsquashed similarity track for a dataset record."""
    if record.scores is not None:
        return ScoreTrack(np.asarray(record.scores, dtype=np.float64), record.fps)
    if params is None:
        raise ValueError("feature records need matching parameters (event embeddings and projectors)")
    stack = record.load_features()
    frames = project(aggregate_layers(stack, cfg.aggregation, cfg.layer_mask), params.frame_proj)
    return cosine_track(params.event_vector(record.query_id), frames, record.fps)


def smooth_track(track: ScoreTrack, cfg: RunConfig) -> ScoreTrack:
    if cfg.smoothing == "none":
        return track
    if cfg.smoothing == "savitzky_golay":
        return smooth(track, cfg.sg_kernel(), cfg.edge_mode)
    if cfg.smoothing == "moving_average":
        return track.with_scores(analysis.moving_average(track.scores, cfg.smooth_window), smoothed=True)
    return track.with_scores(analysis.exponential_average(track.scores, cfg.smooth_window), smoothed=True)


def process_track(track: ScoreTrack, cfg: RunConfig) -> ScoreTrack:
    return smooth_track(squash_track(track, cfg.squash, cfg.temperature), cfg)


def _run_one(record, cfg: RunConfig, params: MatchParams | None) -> tuple[Prediction, EvalRecord]:
    try:
        track = process_track(raw_track(record, cfg, params), cfg)
        segs = extract(track, cfg.extraction())
        scores = tuple(mean_score(s, track) for s in segs)
        highlights = tuple(highlight_peaks(track, cfg.highlight_count))
        gt = record.ground_truth
    except (ValueError, KeyError) as exc:
        raise ValueError(f"query {record.query_id} (video {record.video_id}): {exc}") from exc
    pred = Prediction(record.video_id, record.query_id, segs, scores, highlights)
    rec = EvalRecord(
        query_id=record.query_id,
        predictions=segs,
        ground_truth=gt,
        scores=scores,
        highlights=highlights,
        saliency=record.saliency,
        fps=record.fps,
    )
    return pred, rec


def run_pipeline(records: Sequence, cfg: RunConfig = RunConfig(), params: MatchParams | None = None, threads: int = 1) -> PipelineResult:
    """Squash, smooth, segment and score every record.

    Records are processed independently; with ``threads > 1`` they run on a
    thread pool and results are gathered in input order, so the output does
    not depend on scheduling.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1:
        pairs = [_run_one(r, cfg, params) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(lambda r: _run_one(r, cfg, params), records))
    preds = tuple(p for p, _ in pairs)
    evals = tuple(e for _, e in pairs)
    return PipelineResult(evaluate(evals), preds, evals)


def _axis_config(cfg: RunConfig, axis: str, value) -> RunConfig:
    if axis == "sigma":
        return replace(cfg, sigma=float(value))
    if axis == "alpha":
        return replace(cfg, alpha=float(value))
    if axis == "k":
        return replace(cfg, sg_half_window=int(value), smoothing="savitzky_golay")
    if axis == "aggregation":
        return replace(cfg, aggregation=str(value))
    strat = value if isinstance(value, analysis.SmoothingStrategy) else analysis.SmoothingStrategy.parse(str(value))
    return replace(cfg, smoothing=strat.kind, sg_half_window=strat.window, sg_order=strat.poly_order, smooth_window=strat.window)


def sweep(records: Sequence, axis: str, values: Sequence, cfg: RunConfig = RunConfig(), params: MatchParams | None = None, threads: int = 1, train_cfg=None) -> list[tuple[Any, EvalReport]]:
    """One pipeline run per axis value.

    ``alpha`` only shapes training labels: for feature records with a
    ``train_cfg`` the head is retrained per value on the records themselves;
    otherwise every row equals the base run.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    rows = []
    for value in values:
        run_cfg = _axis_config(cfg, axis, value)
        run_params = params
        if axis == "alpha" and train_cfg is not None and all(r.scores is None for r in records):
            from .trainer import examples_from_records, train_examples

            tcfg = replace(train_cfg, alpha=run_cfg.alpha, halo=run_cfg.halo_width)
            run_params = train_examples(examples_from_records(records, tcfg), tcfg).params
        rows.append((value, run_pipeline(records, run_cfg, run_params, threads).report))
    return rows


def sweep_to_csv(axis: str, rows: Sequence[tuple[Any, EvalReport]]) -> str:
    keys: list[str] = []
    for _, rep in rows:
        for k in ("R@0.5", "mIoU", "F1@0.5"):
            if k in rep.metrics and k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([axis] + keys)
    for value, rep in rows:
        w.writerow([value] + [repr(rep.metrics[k]) if k in rep.metrics else "" for k in keys])
    return buf.getvalue()
