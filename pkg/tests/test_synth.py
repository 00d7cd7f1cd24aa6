import numpy as np
import pytest

from evtmatch.synth import DURATION_BUCKETS, SyntheticScenario, generate, suite_records


def test_deterministic():
    sc = SyntheticScenario(num_videos=5, seed=9)
    a, b = generate(sc), generate(sc)
    for va, vb in zip(a.videos, b.videos):
        assert va.span == vb.span and np.array_equal(va.stack.data, vb.stack.data)


def test_spans_inside_video_and_buckets_covered():
    suite = generate(SyntheticScenario(num_videos=100, seed=1))
    durations = []
    for v in suite.videos:
        s, e = v.span
        assert 0 <= s <= e <= v.num_frames - 1
        durations.append(v.gt.duration)
    for lo, hi in DURATION_BUCKETS:
        assert any(lo <= d <= hi + 0.5 for d in durations)


def test_layer_average_improves_snr():
    suite = generate(SyntheticScenario(num_videos=4, num_layers=4, noise=0.5, distractor_rate=0.0, seed=2))
    v = suite.videos[0]
    s, e = v.span
    c = suite.content[v.query_id]
    single = v.stack.data[0, s : e + 1] @ c / np.linalg.norm(v.stack.data[0, s : e + 1], axis=1)
    avg = v.stack.data[:, s : e + 1].mean(axis=0)
    pooled = avg @ c / np.linalg.norm(avg, axis=1)
    assert pooled.mean() > single.mean()


def test_validation():
    with pytest.raises(ValueError):
        SyntheticScenario(noise=-1)
    with pytest.raises(ValueError):
        SyntheticScenario(dim=4, num_queries=4)
    with pytest.raises(ValueError):
        SyntheticScenario(distractor_rate=2)


def test_records_match_videos():
    suite = generate(SyntheticScenario(num_videos=3, seed=0))
    for r, v in zip(suite_records(suite), suite.videos):
        assert r.num_frames == v.num_frames and r.ground_truth[0] == v.gt
        assert len(r.saliency) == v.num_frames and max(r.saliency) == 4
