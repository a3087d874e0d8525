import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consistent_kmedian.metric import (
    MetricSpace,
    Stream,
    UnknownPointError,
    line_space,
    read_stream,
    validate_metric,
    write_stream,
)


def test_distance_basics():
    s = line_space([0.0, 3.0])
    assert s.distance(0, 0) == 0.0
    assert s.distance(0, 1) == 3.0
    m = MetricSpace.from_matrix([[0, 7], [7, 0]])
    assert m.distance(0, 1) == 7.0


def test_l1_and_l2_differ_in_the_plane():
    pts = [[0.0, 0.0], [3.0, 4.0]]
    assert MetricSpace.euclidean(pts, 1).distance(0, 1) == 7.0
    assert MetricSpace.euclidean(pts, 2).distance(0, 1) == 5.0


def test_unknown_id():
    s = line_space([0.0])
    with pytest.raises(UnknownPointError):
        s.distance(0, 1)
    with pytest.raises(KeyError):
        s.distances_from(3)


def test_validate_metric():
    assert validate_metric(MetricSpace.euclidean(np.random.default_rng(0).normal(size=(12, 3)))) is None
    assert validate_metric(MetricSpace("matrix", matrix=[[0, 1], [1, 0]])) is None
    bad = MetricSpace("matrix", matrix=[[0, 1, 10], [1, 0, 1], [10, 1, 0]])
    assert validate_metric(bad) == (0, 1, 2)
    with pytest.raises(ValueError, match="triangle"):
        MetricSpace.from_matrix([[0, 1, 10], [1, 0, 1], [10, 1, 0]])


def test_matrix_must_be_symmetric():
    with pytest.raises(ValueError):
        MetricSpace("matrix", matrix=[[0, 1], [2, 0]])


def test_append_grows_space():
    s = MetricSpace("l2", coords=np.zeros((0, 2)))
    for i in range(40):
        assert s.append([i, 0]) == i
    assert len(s) == 40
    assert s.distance(0, 39) == 39.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2), min_size=1, max_size=20))
def test_pairwise_matches_distance(pts):
    s = MetricSpace.euclidean(pts, 2)
    d = s.pairwise()
    for a in range(len(pts)):
        for b in range(len(pts)):
            assert d[a, b] == pytest.approx(s.distance(a, b), abs=1e-6)
        np.testing.assert_allclose(s.distances_from(a), d[a], atol=1e-6)


def test_stream_roundtrip_coords(tmp_path):
    pts = np.random.default_rng(1).normal(size=(15, 3))
    st_ = Stream(MetricSpace.euclidean(pts, 1), {"family": "x"})
    path = tmp_path / "s.jsonl"
    write_stream(path, st_)
    back = read_stream(path)
    assert back.space.kind == "l1"
    assert np.array_equal(back.space.coords, pts)
    assert back.meta["family"] == "x"
    assert list(back.prefix(4)) == [0, 1, 2, 3]


def test_stream_roundtrip_matrix(tmp_path):
    m = np.array([[0, 2, 3], [2, 0, 4], [3, 4, 0]], dtype=float)
    path = tmp_path / "m.jsonl"
    write_stream(path, Stream(MetricSpace.from_matrix(m)))
    assert (tmp_path / "m.csv").exists()
    back = read_stream(path)
    assert back.space.kind == "matrix"
    assert np.array_equal(back.space.matrix, m)


def test_read_rejects_gaps_and_empty(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps({"id": 0, "coords": [0]}) + "\n" + json.dumps({"id": 2, "coords": [1]}) + "\n")
    with pytest.raises(ValueError, match="dense"):
        read_stream(p)
    e = tmp_path / "empty.jsonl"
    e.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_stream(e)
