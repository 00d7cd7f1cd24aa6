import math

import numpy as np
import pytest

from evtmatch.labels import build_labels
from evtmatch.pipeline import RunConfig, raw_track, run_pipeline
from evtmatch.synth import SyntheticScenario, generate, suite_records
from evtmatch.trainer import (
    MatchParams,
    TrainConfig,
    TrainingDiverged,
    TrainingExample,
    batch_loss,
    boundary_baseline,
    loss_gradient,
    matching_loss,
    train,
    train_examples,
)
from evtmatch.types import ScoreTrack, Segment

import oracles


def test_loss_examples():
    assert matching_loss(np.array([0.3, 0.9]), np.zeros(2)) == 0.0
    assert matching_loss(np.array([1 / math.e, 0.5]), np.array([1.0, 0.0])) == pytest.approx(0.5, abs=1e-15)
    assert matching_loss(np.ones(4), np.ones(4)) == 0.0


def test_loss_errors():
    with pytest.raises(ValueError):
        matching_loss(np.array([0.5, -0.1]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        matching_loss(ScoreTrack([0.5, 0.5], 1), np.array([1.0]))


def test_loss_nonnegative_on_squashed_tracks():
    rng = np.random.default_rng(0)
    from evtmatch.matcher import squash_scores

    for mode in ("softmax", "shifted"):
        s = squash_scores(rng.uniform(-1, 1, 20), mode)
        assert matching_loss(s, rng.random(20)) >= 0


@pytest.mark.parametrize("squash", ["softmax", "shifted"])
def test_gradient_matches_finite_differences(squash):
    rng = np.random.default_rng(17 if squash == "softmax" else 18)
    for _ in range(10):
        params, batch = oracles.random_grad_instance(rng)
        _, grads = loss_gradient(params, batch, squash, 0.5)
        worst = oracles.fd_worst(lambda f: loss_gradient(params.replace_flat(f), batch, squash, 0.5)[0], params.flat(), grads)
        assert worst <= 1e-4


def test_gradient_identity_activation():
    from evtmatch.matcher import Projector

    rng = np.random.default_rng(2)
    params, batch = oracles.random_grad_instance(rng)
    ev = params.event_proj
    params = MatchParams(Projector(ev.w1, ev.b1, ev.w2, ev.b2, "identity"), params.frame_proj, params.embeddings)
    _, grads = loss_gradient(params, batch, "softmax", 0.3)
    fn = lambda f: loss_gradient(params.replace_flat(f), batch, "softmax", 0.3)[0]
    assert oracles.fd_worst(fn, params.flat(), grads) <= 1e-4


def test_zero_labels_zero_gradient():
    rng = np.random.default_rng(3)
    params, batch = oracles.random_grad_instance(rng)
    batch = [TrainingExample(b.query_id, b.features, np.zeros_like(b.labels)) for b in batch]
    loss, grads = loss_gradient(params, batch)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_duplicate_doubles_gradient():
    rng = np.random.default_rng(4)
    params, batch = oracles.random_grad_instance(rng)
    one = batch[:1]
    l1, g1 = loss_gradient(params, one)
    l2, g2 = loss_gradient(params, one + one)
    assert l2 == 2 * l1
    for k in g1:
        np.testing.assert_array_equal(g2[k], 2 * g1[k])


def test_batch_loss_agrees():
    rng = np.random.default_rng(5)
    params, batch = oracles.random_grad_instance(rng)
    assert batch_loss(params, batch, "softmax", 0.1) == pytest.approx(loss_gradient(params, batch, "softmax", 0.1)[0], rel=1e-12)


SMALL = SyntheticScenario(num_videos=12, noise=0.0, distractor_rate=0.0, boundary_strength=0.0, seed=3, num_layers=2, dim=16, num_queries=2)


def test_noise_free_separable_training():
    res = train(SMALL, TrainConfig())
    assert res.losses[-1] < res.losses[0]
    assert len(res.losses) == TrainConfig().epochs + 1
    records = suite_records(generate(SMALL))
    # the trained head must separate every event frame from every other frame
    inside, outside = [], []
    for r in records:
        tr = raw_track(r, RunConfig(), res.params)
        m = build_labels(r.ground_truth, r.num_frames, r.fps).values == 1
        inside.append(tr.scores[m].min())
        outside.append(tr.scores[~m].max())
    assert max(outside) < min(inside)
    # so a threshold between the two groups recovers every event exactly
    sigma = ((max(outside) + min(inside)) / 2 + 1) / 2
    rep = run_pipeline(records, RunConfig(squash="shifted", sigma=sigma, smoothing="none"), res.params).report
    assert rep.metrics["mIoU"] == 1.0


def test_zero_learning_rate_is_frozen():
    cfg = TrainConfig(learning_rate=0.0, epochs=3)
    res = train(SMALL, cfg)
    assert len(set(res.losses)) == 1
    init = MatchParams.initial(16, ["q0", "q1"], cfg.seed, cfg.init_scale)
    for k, v in init.flat().items():
        np.testing.assert_array_equal(res.params.flat()[k], v)


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=5)
    a, b = train(SMALL, cfg), train(SMALL, cfg)
    assert a.losses == b.losses
    for k, v in a.params.flat().items():
        assert np.array_equal(v, b.params.flat()[k])


def test_divergence_is_reported():
    with pytest.raises(TrainingDiverged):
        train(SMALL, TrainConfig(learning_rate=1e300, epochs=3))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(squash="none")


def test_baseline_exact_on_clean_boundaries():
    suite = generate(SyntheticScenario(num_videos=10, noise=0.0, distractor_rate=0.0, seed=2))
    from evtmatch.matcher import aggregate_layers

    for v in suite.videos:
        assert boundary_baseline(v.start_token, v.end_token, aggregate_layers(v.stack), v.fps) == v.gt


def test_baseline_two_peak_failure_mode():
    D, T = 4, 30
    frames = np.tile([0.0, 0.0, 0.0, 1.0], (T, 1))
    start = np.array([1.0, 0.0, 0.0, 0.0])
    end = np.array([0.0, 1.0, 0.0, 0.0])
    frames[10] = [1.0, 0.0, 0.0, 0.1]  # true start
    frames[15] = [0.0, 1.0, 0.0, 0.1]  # true end
    frames[25] = [1.0, 0.0, 0.0, 0.0]  # distant look-alike, slightly better match
    cos = frames @ start / np.linalg.norm(frames, axis=1)
    assert int(np.argmax(cos)) == 25
    seg = boundary_baseline(start, end, frames)
    assert seg == Segment(15.0, 26.0)  # swapped into order, off the true event


def test_baseline_swaps():
    frames = np.eye(3)
    seg = boundary_baseline(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), frames)
    assert seg.start <= seg.end and seg == Segment(0.0, 3.0)


def test_baseline_zero_norm():
    with pytest.raises(ValueError):
        boundary_baseline(np.zeros(3), np.ones(3), np.eye(3))
