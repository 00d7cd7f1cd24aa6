"""Token-to-frame matching: layer aggregation, projection and cosine scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .types import ScoreTrack

AGGREGATIONS = ("average", "max", "median")
ACTIVATIONS = ("tanh", "identity")
DEFAULT_TEMPERATURE = 0.1
LOG_FLOOR = np.finfo(np.float64).eps


@dataclass(frozen=True, eq=False)
class FeatureStack:
    """Per-video multi-layer frame features, shape ``(layers, frames, dim)``."""

    data: np.ndarray
    fps: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"feature stack must be (L, T, D) with L, T, D >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature stack contains non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class Projector:
    """Two-layer map ``w2 @ act(w1 @ x + b1) + b2`` applied row-wise."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for name in ("w1", "b1", "w2", "b2"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"projector parameter {name} is not finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        hidden, d_in = self.w1.shape
        d_out, hidden2 = self.w2.shape
        if self.b1.shape != (hidden,) or hidden2 != hidden or self.b2.shape != (d_out,):
            raise ValueError("inconsistent projector parameter shapes")

    @property
    def dim(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def identity(cls, dim: int, activation: str = "identity") -> "Projector":
        eye = np.eye(dim)
        return cls(eye, np.zeros(dim), eye, np.zeros(dim), activation)

    @classmethod
    def near_identity(cls, dim: int, rng: np.random.Generator, scale: float = 0.01) -> "Projector":
        return cls(
            np.eye(dim) + scale * rng.standard_normal((dim, dim)),
            np.zeros(dim),
            np.eye(dim) + scale * rng.standard_normal((dim, dim)),
            np.zeros(dim),
            "tanh",
        )

    def params(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def _act(x: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(x) if activation == "tanh" else x


def aggregate_layers(
    stack: FeatureStack,
    strategy: str = "average",
    layer_mask: Sequence[bool] | None = None,
) -> np.ndarray:
    """Collapse the layer axis into a ``(T, D)`` frame-feature matrix."""
    data = stack.data
    if layer_mask is not None:
        mask = np.asarray(layer_mask, dtype=bool)
        if mask.shape != (data.shape[0],) or not mask.any():
            raise ValueError("layer mask must select at least one of the stack's layers")
        data = data[mask]
    if strategy == "average":
        return data.mean(axis=0)
    if strategy == "max":
        return data.max(axis=0)
    if strategy == "median":
        return np.median(data, axis=0)
    raise ValueError(f"unknown aggregation strategy {strategy!r}; expected one of {AGGREGATIONS}")


def project(features: np.ndarray, projector: Projector) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != projector.dim:
        raise ValueError(f"feature width {x.shape[-1]} does not match projector width {projector.dim}")
    hidden = _act(x @ projector.w1.T + projector.b1, projector.activation)
    return hidden @ projector.w2.T + projector.b2


def cosine_scores(event: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Raw cosine similarities; zero-norm frames score 0."""
    e = np.asarray(event, dtype=np.float64).reshape(-1)
    f = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if f.shape[1] != e.shape[0]:
        raise ValueError(f"event width {e.shape[0]} does not match frame width {f.shape[1]}")
    e_norm = np.linalg.norm(e)
    if not np.isfinite(e_norm) or e_norm == 0:
        raise ValueError("event embedding must have non-zero finite norm")
    f_norm = np.linalg.norm(f, axis=1)
    dots = f @ e
    safe = np.where(f_norm > 0, f_norm, 1.0)
    cos = np.where(f_norm > 0, dots / (safe * e_norm), 0.0)
    return np.clip(cos, -1.0, 1.0)


def cosine_track(event: np.ndarray, frames: np.ndarray, fps: float = 1.0) -> ScoreTrack:
    return ScoreTrack(cosine_scores(event, frames), fps)


def squash_scores(scores: np.ndarray, mode: str, temperature: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if mode == "none":
        return s.copy()
    if mode == "softmax":
        if temperature <= 0:
            raise ValueError("softmax temperature must be positive")
        z = s / temperature
        z = np.exp(z - z.max())
        return z / z.sum()
    if mode == "shifted":
        return np.maximum((s + 1.0) / 2.0, LOG_FLOOR)
    raise ValueError(f"unknown squash mode {mode!r}")


def squash_track(track: ScoreTrack, mode: str, temperature: float = DEFAULT_TEMPERATURE) -> ScoreTrack:
    """Map raw cosines into a positive range so ``log`` is defined.

    ``softmax`` normalises over frames with temperature ``temperature``;
    ``shifted`` is ``(s + 1) / 2`` floored at machine epsilon.
    """
    return track.with_scores(
        squash_scores(track.scores, mode, temperature),
        squash=mode,
        temperature=temperature if mode == "softmax" else None,
    )
