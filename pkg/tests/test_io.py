import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evtmatch.io import (
    DatasetRecord,
    FormatError,
    ingest,
    load_params,
    read_features,
    record_from_dict,
    save_params,
    serialize_record,
    write_features,
    write_jsonl,
)
from evtmatch.trainer import MatchParams


def test_minimal_feature_file(tmp_path):
    p = tmp_path / "one.emgf"
    p.write_bytes(b"EMG-FEAT v1 1 1 1\n" + struct.pack("<f", 1.0))
    st_ = read_features(p)
    assert st_.shape == (1, 1, 1) and st_.data[0, 0, 0] == 1.0


def test_truncated_payload(tmp_path):
    p = tmp_path / "short.emgf"
    p.write_bytes(b"EMG-FEAT v1 1 2 2\n" + struct.pack("<3f", 1, 2, 3))
    with pytest.raises(FormatError, match="expected 16 bytes, got 12"):
        read_features(p)


def test_trailing_bytes_and_bad_header(tmp_path):
    p = tmp_path / "long.emgf"
    p.write_bytes(b"EMG-FEAT v1 1 1 1\n" + struct.pack("<2f", 1, 2))
    with pytest.raises(FormatError, match="trailing"):
        read_features(p)
    p.write_bytes(b"EMG-FEAT v2 1 1 1\n" + struct.pack("<f", 1))
    with pytest.raises(FormatError, match="header"):
        read_features(p)
    p.write_bytes(b"no newline")
    with pytest.raises(FormatError):
        read_features(p)


def test_non_finite_payload(tmp_path):
    p = tmp_path / "nan.emgf"
    p.write_bytes(b"EMG-FEAT v1 1 1 2\n" + struct.pack("<2f", 1, float("nan")))
    with pytest.raises(FormatError, match="non-finite"):
        read_features(p)


def test_round_trip_against_byte_level_writer(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((2, 5, 3)).astype(np.float32)
    # independent writer: struct, element by element
    blob = b"EMG-FEAT v1 2 5 3\n" + b"".join(struct.pack("<f", float(v)) for v in data.ravel(order="C"))
    (tmp_path / "ref.emgf").write_bytes(blob)
    write_features(tmp_path / "ours.emgf", data)
    assert (tmp_path / "ours.emgf").read_bytes() == blob
    back = read_features(tmp_path / "ref.emgf")
    assert np.array_equal(back.data.astype(np.float32), data)


def test_ingest_empty(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("")
    assert ingest(p) == []


REC = {"video_id": "v1", "query_id": "q1", "fps": 2.0, "num_frames": 3, "gt_segments": [[0.5, 1.0]], "scores": [0.1, 0.2, 0.3]}


def test_ingest_round_trip(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps(REC) + "\n")
    (r,) = ingest(p)
    assert json.loads(serialize_record(r)) == REC
    write_jsonl(tmp_path / "again.jsonl", [r])
    assert ingest(tmp_path / "again.jsonl") == [r]


def test_length_mismatch_names_line_and_lengths(tmp_path):
    bad = dict(REC, scores=[0.1, 0.2])
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps(REC) + "\n\n" + json.dumps(bad) + "\n")
    with pytest.raises(FormatError, match=r"d\.jsonl:3: .*length 2 .*num_frames is 3"):
        ingest(p)


@pytest.mark.parametrize(
    "change",
    [
        {"gt_segments": []},
        {"fps": 0},
        {"num_frames": 2.5},
        {"extra": 1},
        {"features_ref": "x.emgf"},
        {"gt_segments": [[3, 1]]},
    ],
)
def test_invalid_records(change):
    with pytest.raises((ValueError, TypeError)):
        record_from_dict(dict(REC, **change))


def test_malformed_json_line(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text("{not json\n")
    with pytest.raises(FormatError, match=":1:"):
        ingest(p)


def test_feature_ref_resolution(tmp_path):
    data = np.ones((1, 4, 2), dtype=np.float32)
    write_features(tmp_path / "f.emgf", data)
    rec = dict(REC, num_frames=4, features_ref="f.emgf")
    del rec["scores"]
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps(rec) + "\n")
    (r,) = ingest(p)
    assert r.load_features().shape == (1, 4, 2)
    bad = DatasetRecord("v", "q", 1.0, 5, ((0, 1),), features_ref="f.emgf", base_dir=tmp_path)
    with pytest.raises(FormatError, match="4 frames"):
        bad.load_features()


@given(
    st.text(min_size=1, max_size=8),
    st.floats(0.1, 60),
    st.lists(st.floats(-1, 1), min_size=1, max_size=10),
)
def test_serialize_ingest_identity(vid, fps, scores):
    rec = DatasetRecord(vid, "q", fps, len(scores), ((0.0, len(scores) / fps),), scores=tuple(scores))
    assert record_from_dict(json.loads(serialize_record(rec))) == rec


def test_params_round_trip(tmp_path):
    p = MatchParams.initial(5, ["a", "b"], seed=3)
    save_params(tmp_path / "p.json", p)
    q = load_params(tmp_path / "p.json")
    for k, v in p.flat().items():
        assert np.array_equal(v, q.flat()[k])
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(FormatError):
        load_params(tmp_path / "bad.json")
