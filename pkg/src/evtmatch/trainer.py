"""Toy training of the matching head against the event-matching loss.

Everything upstream of the aggregated frame features is fixed; the trainable
parameters are the two projectors and one free event embedding per query.
Gradients are derived by hand and checked against finite differences in the
test suite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .labels import DEFAULT_ALPHA, DEFAULT_HALO, LabelVector, frames_to_seconds
from .matcher import DEFAULT_TEMPERATURE, LOG_FLOOR, Projector, cosine_scores, squash_scores
from .types import ScoreTrack, Segment

log = logging.getLogger(__name__)

PROJECTOR_KEYS = ("w1", "b1", "w2", "b2")


class TrainingDiverged(ArithmeticError):
    """Raised when the loss stops being finite."""


@dataclass(frozen=True, eq=False)
class MatchParams:
    event_proj: Projector
    frame_proj: Projector
    embeddings: dict[str, np.ndarray]

    @property
    def dim(self) -> int:
        return self.frame_proj.dim

    @classmethod
    def initial(cls, dim: int, query_ids: Sequence[str], seed: int = 0, scale: float = 0.01) -> "MatchParams":
        rng = np.random.default_rng(seed)
        ev = Projector.near_identity(dim, rng, scale)
        fr = Projector.near_identity(dim, rng, scale)
        emb = {q: rng.standard_normal(dim) / np.sqrt(dim) for q in sorted(set(query_ids))}
        return cls(ev, fr, emb)

    def flat(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, proj in (("event", self.event_proj), ("frame", self.frame_proj)):
            for k in PROJECTOR_KEYS:
                out[f"{prefix}.{k}"] = np.array(getattr(proj, k))
        for q in sorted(self.embeddings):
            out[f"embedding.{q}"] = np.array(self.embeddings[q], dtype=np.float64)
        return out

    @classmethod
    def from_flat(cls, flat: dict[str, np.ndarray], event_activation: str = "tanh", frame_activation: str = "tanh") -> "MatchParams":
        ev = Projector(*(flat[f"event.{k}"] for k in PROJECTOR_KEYS), activation=event_activation)
        fr = Projector(*(flat[f"frame.{k}"] for k in PROJECTOR_KEYS), activation=frame_activation)
        emb = {k.split(".", 1)[1]: np.array(v) for k, v in flat.items() if k.startswith("embedding.")}
        return cls(ev, fr, emb)

    def replace_flat(self, flat: dict[str, np.ndarray]) -> "MatchParams":
        return MatchParams.from_flat(flat, self.event_proj.activation, self.frame_proj.activation)

    def event_vector(self, query_id: str) -> np.ndarray:
        """Projected event embedding for ``query_id``."""
        if query_id not in self.embeddings:
            raise KeyError(f"no event embedding for query {query_id!r}")
        return _forward(self.event_proj, self.embeddings[query_id][None, :])[2][0]


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """Aggregated ``(T, D)`` frame features with their label vector."""

    query_id: str
    features: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 150
    squash: str = "softmax"
    temperature: float = DEFAULT_TEMPERATURE
    alpha: float = DEFAULT_ALPHA
    halo: int = DEFAULT_HALO
    aggregation: str = "average"
    init_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.squash not in ("softmax", "shifted"):
            raise ValueError("training needs a differentiable squash: softmax or shifted")


@dataclass(frozen=True, eq=False)
class TrainResult:
    params: MatchParams
    losses: list[float] = field(default_factory=list)


def _forward(proj: Projector, x: np.ndarray):
    h = x @ proj.w1.T + proj.b1
    a = np.tanh(h) if proj.activation == "tanh" else h
    return h, a, a @ proj.w2.T + proj.b2


def _backward(proj: Projector, x: np.ndarray, a: np.ndarray, dout: np.ndarray):
    grads = {"w2": dout.T @ a, "b2": dout.sum(axis=0)}
    da = dout @ proj.w2
    dh = da * (1.0 - a * a) if proj.activation == "tanh" else da
    grads["w1"] = dh.T @ x
    grads["b1"] = dh.sum(axis=0)
    return grads, dh @ proj.w1


def matching_loss(track: ScoreTrack | np.ndarray, labels: LabelVector | np.ndarray) -> float:
    """``-(1/T) * sum_t y_t * log(s_t)`` over a squashed track.

    Raises:
        ValueError: on length mismatch or any non-positive score, which means
            the raw cosines were not squashed first.
    """
    s = np.asarray(track.scores if isinstance(track, ScoreTrack) else track, dtype=np.float64)
    y = np.asarray(labels.values if isinstance(labels, LabelVector) else labels, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError(f"track length {s.shape[0]} != label length {y.shape[0]}")
    if np.any(s <= 0):
        raise ValueError("matching loss needs strictly positive scores; squash the track first")
    return float(-np.sum(y * np.log(s)) / s.shape[0])


def example_loss_gradient(params: MatchParams, ex: TrainingExample, squash: str, temperature: float):
    x = np.asarray(ex.features, dtype=np.float64)
    y = np.asarray(ex.labels, dtype=np.float64)
    n = x.shape[0]
    e = params.embeddings[ex.query_id]
    with np.errstate(over="ignore", invalid="ignore"):
        _, ae, me = _forward(params.event_proj, e[None, :])
        _, af, mf = _forward(params.frame_proj, x)
    me = me[0]
    if not (np.all(np.isfinite(me)) and np.all(np.isfinite(mf))):
        raise TrainingDiverged("projected features overflowed")

    c = cosine_scores(me, mf)
    s = squash_scores(c, squash, temperature)
    loss = float(-np.sum(y * np.log(s)) / n)

    if squash == "softmax":
        gc = -(y - s * y.sum()) / (n * temperature)
    else:
        gc = np.where((c + 1.0) / 2.0 > LOG_FLOOR, -0.5 * y / (n * s), 0.0)

    ne = np.linalg.norm(me)
    nf = np.linalg.norm(mf, axis=1)
    live = nf > 0
    inv = np.where(live, 1.0 / np.where(live, nf, 1.0), 0.0)
    gl = np.where(live, gc, 0.0)
    # d cos / d frame_t = me/(|f||e|) - c f/|f|^2 ; d cos / d me = f/(|f||e|) - c me/|e|^2
    dmf = gl[:, None] * (me[None, :] * (inv / ne)[:, None] - (c * inv * inv)[:, None] * mf)
    dme = (gl * inv / ne) @ mf - np.sum(gl * c) * me / (ne * ne)

    gf, _ = _backward(params.frame_proj, x, af, dmf)
    ge, de = _backward(params.event_proj, e[None, :], ae, dme[None, :])
    grads = {f"frame.{k}": v for k, v in gf.items()}
    grads.update({f"event.{k}": v for k, v in ge.items()})
    grads[f"embedding.{ex.query_id}"] = de[0]
    return loss, grads


def loss_gradient(params: MatchParams, batch: Sequence[TrainingExample], squash: str = "softmax", temperature: float = DEFAULT_TEMPERATURE):
    """Summed loss over the batch and its gradient for every trainable array.

    The returned gradient dict has the same keys as :meth:`MatchParams.flat`.
    """
    grads = {k: np.zeros_like(v) for k, v in params.flat().items()}
    total = 0.0
    for ex in batch:
        loss, g = example_loss_gradient(params, ex, squash, temperature)
        total += loss
        for k, v in g.items():
            grads[k] += v
    return total, grads


def batch_loss(params: MatchParams, batch: Sequence[TrainingExample], squash: str, temperature: float) -> float:
    total = 0.0
    for ex in batch:
        me = params.event_vector(ex.query_id)
        mf = _forward(params.frame_proj, np.asarray(ex.features, dtype=np.float64))[2]
        s = squash_scores(cosine_scores(me, mf), squash, temperature)
        total += float(-np.sum(ex.labels * np.log(s)) / s.shape[0])
    return total


def train_examples(examples: Sequence[TrainingExample], cfg: TrainConfig, init: MatchParams | None = None) -> TrainResult:
    """Full-batch gradient descent on the mean per-video loss.

    The loss curve holds the initial loss followed by the loss after each epoch.
    """
    if not examples:
        raise ValueError("no training examples")
    dim = examples[0].features.shape[1]
    params = init or MatchParams.initial(dim, [ex.query_id for ex in examples], cfg.seed, cfg.init_scale)
    n = len(examples)
    flat = params.flat()
    losses = []
    for epoch in range(cfg.epochs + 1):
        loss, grads = loss_gradient(params, examples, cfg.squash, cfg.temperature)
        mean = loss / n
        if not np.isfinite(mean):
            raise TrainingDiverged(f"loss became {mean} at epoch {epoch}; lower the learning rate")
        losses.append(mean)
        if epoch == cfg.epochs:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            for k in flat:
                flat[k] = flat[k] - cfg.learning_rate * grads[k] / n
        bad = [k for k, v in flat.items() if not np.all(np.isfinite(v))]
        if bad:
            raise TrainingDiverged(f"parameters {bad[0]} became non-finite at epoch {epoch + 1}; lower the learning rate")
        params = params.replace_flat(flat)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.6f", epoch, mean)
    return TrainResult(params, losses)


def boundary_baseline(start_emb: np.ndarray, end_emb: np.ndarray, frames: np.ndarray, fps: float = 1.0) -> Segment:
    """Two-token boundary matching: argmax frame per token, swapped into order."""
    s = int(np.argmax(cosine_scores(start_emb, frames)))
    e = int(np.argmax(cosine_scores(end_emb, frames)))
    if s > e:
        s, e = e, s
    return frames_to_seconds(s, e, fps)


def examples_from_records(records, cfg: TrainConfig) -> list[TrainingExample]:
    """Aggregate each feature record and attach its smoothed labels."""
    from .labels import build_labels
    from .matcher import aggregate_layers

    out = []
    for r in records:
        feats = aggregate_layers(r.load_features(), cfg.aggregation)
        y = build_labels(r.ground_truth, r.num_frames, r.fps, cfg.alpha, cfg.halo)
        out.append(TrainingExample(r.query_id, feats, y.values))
    return out


def train(scenario, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Generate ``scenario`` and fit the matching head on all of its videos."""
    from .synth import generate, suite_records

    return train_examples(examples_from_records(suite_records(generate(scenario)), cfg), cfg)
