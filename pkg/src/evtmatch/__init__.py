"""Event-token temporal grounding on similarity score tracks."""

from .kernels import BACKEND
from .labels import LabelVector, build_labels, build_labels_from_frames, frames_to_seconds, seconds_to_frames
from .matcher import FeatureStack, Projector, aggregate_layers, cosine_track, project, squash_track
from .metrics import EvalRecord, EvalReport, evaluate, temporal_iou
from .segmenter import ExtractionConfig, extract, highlight_peaks, top_segment
from .sgfilter import SGKernel, derive_kernel, smooth
from .types import ScoreTrack, Segment, SegmentSet

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EvalRecord",
    "EvalReport",
    "ExtractionConfig",
    "FeatureStack",
    "LabelVector",
    "Projector",
    "SGKernel",
    "ScoreTrack",
    "Segment",
    "SegmentSet",
    "aggregate_layers",
    "build_labels",
    "build_labels_from_frames",
    "cosine_track",
    "derive_kernel",
    "evaluate",
    "extract",
    "frames_to_seconds",
    "highlight_peaks",
    "project",
    "seconds_to_frames",
    "smooth",
    "squash_track",
    "temporal_iou",
    "top_segment",
]
