"""On-disk formats.

Dataset (JSON Lines, UTF-8, one object per line)::

    {"video_id": str, "query_id": str, "fps": float, "num_frames": int,
     "gt_segments": [[start_s, end_s], ...],
     "scores": [float] * num_frames,      # exactly one of scores /
     "features_ref": "relative/path.emgf", # features_ref
     "saliency": [int] * num_frames}      # optional

Feature file (EMG-FEAT v1): the ASCII header ``EMG-FEAT v1 <L> <T> <D>\\n``
followed by exactly ``L*T*D`` little-endian float32 values, layer-major, then
frame, then dimension.

Parameter file (JSON): ``{"format": "evtmatch-params v1", "dim": D,
"event_projector": P, "frame_projector": P, "embeddings": {query_id: [D
floats]}}`` where ``P = {"activation", "w1", "b1", "w2", "b2"}`` holds nested
lists.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .matcher import FeatureStack, Projector
from .trainer import MatchParams
from .types import Segment, SegmentSet

FEATURE_FORMAT = "EMG-FEAT v1"
DATASET_FORMAT = "evtmatch-jsonl v1"
PARAMS_FORMAT = "evtmatch-params v1"
_HEADER_RE = re.compile(rb"^EMG-FEAT v1 (\d+) (\d+) (\d+)$")
_RECORD_KEYS = ("video_id", "query_id", "fps", "num_frames", "gt_segments", "scores", "features_ref", "saliency")


class FormatError(ValueError):
    """Malformed input file."""


# ---------------------------------------------------------------- features


def write_features(path: str | Path, stack: FeatureStack | np.ndarray) -> None:
    data = stack.data if isinstance(stack, FeatureStack) else np.asarray(stack)
    if data.ndim != 3:
        raise ValueError("feature data must be (L, T, D)")
    L, T, D = data.shape
    header = f"{FEATURE_FORMAT} {L} {T} {D}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_features(path: str | Path, fps: float = 1.0) -> FeatureStack:
    """Read an EMG-FEAT v1 file.

    Raises:
        FormatError: bad header, truncated or oversized payload, non-finite values.
    """
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    m = _HEADER_RE.match(raw[:nl])
    if not m:
        raise FormatError(f"{path}: header {raw[:min(nl, 40)]!r} is not '{FEATURE_FORMAT} <L> <T> <D>'")
    L, T, D = (int(g) for g in m.groups())
    if min(L, T, D) < 1:
        raise FormatError(f"{path}: shape ({L}, {T}, {D}) must be positive")
    payload = raw[nl + 1 :]
    expected = 4 * L * T * D
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated payload, expected {expected} bytes, got {len(payload)}")
    if len(payload) > expected:
        raise FormatError(f"{path}: {len(payload) - expected} trailing bytes after the {expected}-byte payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(L, T, D)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: payload contains non-finite values")
    return FeatureStack(data.astype(np.float64), fps)


# ---------------------------------------------------------------- dataset


@dataclass(frozen=True)
class DatasetRecord:
    video_id: str
    query_id: str
    fps: float
    num_frames: int
    gt_segments: tuple[tuple[float, float], ...]
    scores: tuple[float, ...] | None = None
    features_ref: str | None = None
    saliency: tuple[int, ...] | None = None
    features: FeatureStack | None = field(default=None, compare=False, repr=False)
    base_dir: Path | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "gt_segments", tuple((float(s), float(e)) for s, e in self.gt_segments))
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(x) for x in self.scores))
        if self.saliency is not None:
            object.__setattr__(self, "saliency", tuple(int(x) for x in self.saliency))
        validate_record(self)

    @property
    def ground_truth(self) -> SegmentSet:
        return SegmentSet(tuple(sorted(Segment(s, e) for s, e in self.gt_segments)))

    def load_features(self) -> FeatureStack:
        if self.features is not None:
            return self.features
        if self.features_ref is None:
            raise ValueError(f"{self.query_id}: record has no features")
        path = Path(self.features_ref)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        stack = read_features(path, self.fps)
        if stack.shape[1] != self.num_frames:
            raise FormatError(f"{path}: {stack.shape[1]} frames but record declares {self.num_frames}")
        return stack

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "video_id": self.video_id,
            "query_id": self.query_id,
            "fps": self.fps,
            "num_frames": self.num_frames,
            "gt_segments": [list(p) for p in self.gt_segments],
        }
        if self.scores is not None:
            d["scores"] = list(self.scores)
        if self.features_ref is not None:
            d["features_ref"] = self.features_ref
        if self.saliency is not None:
            d["saliency"] = list(self.saliency)
        return d


def validate_record(rec: DatasetRecord) -> None:
    if not isinstance(rec.video_id, str) or not isinstance(rec.query_id, str):
        raise ValueError("video_id and query_id must be strings")
    if not rec.fps > 0:
        raise ValueError(f"fps must be positive, got {rec.fps}")
    if rec.num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {rec.num_frames}")
    if not rec.gt_segments:
        raise ValueError("gt_segments must be non-empty")
    for s, e in rec.gt_segments:
        Segment(s, e)
    sources = sum(x is not None for x in (rec.scores, rec.features_ref, rec.features))
    if sources != 1:
        raise ValueError("exactly one of scores / features_ref must be present")
    if rec.scores is not None and len(rec.scores) != rec.num_frames:
        raise ValueError(f"scores has length {len(rec.scores)} but num_frames is {rec.num_frames}")
    if rec.saliency is not None and len(rec.saliency) != rec.num_frames:
        raise ValueError(f"saliency has length {len(rec.saliency)} but num_frames is {rec.num_frames}")
    if rec.features is not None and rec.features.shape[1] != rec.num_frames:
        raise ValueError(f"features have {rec.features.shape[1]} frames but num_frames is {rec.num_frames}")


def record_from_dict(obj: Any, base_dir: Path | None = None) -> DatasetRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    unknown = set(obj) - set(_RECORD_KEYS)
    if unknown:
        raise ValueError(f"unknown field(s) {sorted(unknown)}")
    for key in ("video_id", "query_id", "fps", "num_frames", "gt_segments"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    gts = obj["gt_segments"]
    if not isinstance(gts, list) or not all(isinstance(p, list) and len(p) == 2 for p in gts):
        raise ValueError("field 'gt_segments' must be a list of [start, end] pairs")
    if not isinstance(obj["num_frames"], int) or isinstance(obj["num_frames"], bool):
        raise ValueError("field 'num_frames' must be an integer")
    return DatasetRecord(
        video_id=obj["video_id"],
        query_id=obj["query_id"],
        fps=float(obj["fps"]),
        num_frames=obj["num_frames"],
        gt_segments=tuple(tuple(p) for p in gts),
        scores=obj.get("scores"),
        features_ref=obj.get("features_ref"),
        saliency=obj.get("saliency"),
        base_dir=base_dir,
    )


def ingest(path: str | Path) -> list[DatasetRecord]:
    """Parse and validate a JSON Lines dataset. Blank lines are skipped.

    Raises:
        FormatError: naming the 1-based line number of the first bad record.
    """
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line), path.parent))
            except (ValueError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return records


def serialize_record(rec: DatasetRecord) -> str:
    return json.dumps(rec.to_dict())


def write_jsonl(path: str | Path, rows: Iterable[dict[str, Any] | DatasetRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write((serialize_record(row) if isinstance(row, DatasetRecord) else json.dumps(row)) + "\n")


# ---------------------------------------------------------------- params


def _proj_to_dict(p: Projector) -> dict[str, Any]:
    return {"activation": p.activation, **{k: v.tolist() for k, v in p.params().items()}}


def _proj_from_dict(d: dict[str, Any]) -> Projector:
    return Projector(
        np.array(d["w1"], dtype=np.float64),
        np.array(d["b1"], dtype=np.float64),
        np.array(d["w2"], dtype=np.float64),
        np.array(d["b2"], dtype=np.float64),
        d.get("activation", "tanh"),
    )


def params_to_json(params: MatchParams) -> str:
    doc = {
        "format": PARAMS_FORMAT,
        "dim": params.dim,
        "event_projector": _proj_to_dict(params.event_proj),
        "frame_projector": _proj_to_dict(params.frame_proj),
        "embeddings": {q: params.embeddings[q].tolist() for q in sorted(params.embeddings)},
    }
    return json.dumps(doc, indent=1) + "\n"


def save_params(path: str | Path, params: MatchParams) -> None:
    Path(path).write_text(params_to_json(params), encoding="utf-8")


def load_params(path: str | Path) -> MatchParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != PARAMS_FORMAT:
        raise FormatError(f"{path}: expected format {PARAMS_FORMAT!r}, got {doc.get('format')!r}")
    return MatchParams(
        _proj_from_dict(doc["event_projector"]),
        _proj_from_dict(doc["frame_projector"]),
        {q: np.array(v, dtype=np.float64) for q, v in doc["embeddings"].items()},
    )


def write_loss_csv(path: str | Path, losses: Sequence[float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(losses):
            fh.write(f"{i},{v!r}\n")
