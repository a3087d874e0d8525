from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_kmedian
from consistent_kmedian.metric import MetricSpace, line_space
from consistent_kmedian.offline import (
    EnumerationCapExceeded,
    cost,
    dedup,
    exact_kmedian,
    kmedian_cost,
    labelled_cost,
    local_search_kmedian,
    medoid_factor_check,
    min_labels_within_budget,
)


def test_line_examples():
    c = exact_kmedian(line_space([0, 1, 5]), [0, 1, 2], 2)
    assert c.cost == 1.0 and c.centers == (0, 2)
    c = exact_kmedian(line_space([0, 4, 10]), [0, 1, 2], 1)
    assert c.cost == 10.0 and c.centers == (1,)
    assert c.assignment == {0: 1, 1: 1, 2: 1}
    assert exact_kmedian(line_space([3, 8]), [0, 1], 5).cost == 0.0


def test_cost_and_empty():
    s = line_space([0, 4, 10])
    assert cost(s, [0, 1, 2], 1) == 10.0
    assert cost(s, [], 1) == 0.0
    assert exact_kmedian(s, [], 2).cost == 0.0


def test_dedup():
    s = line_space([2, 1, 2, 1, 7])
    reps, mult, inverse, ids = dedup(s, [4, 0, 1, 2, 3])
    assert reps == [0, 1, 4]
    assert mult.tolist() == [2, 2, 1]
    assert inverse.tolist() == [0, 1, 0, 1, 2]
    m = MetricSpace.from_matrix(s.pairwise())
    assert dedup(m, range(5))[0] == reps


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 15), min_size=1, max_size=9), st.integers(1, 4))
def test_exact_matches_enumeration(xs, k):
    pts = [float(v) for v in xs]
    c = exact_kmedian(line_space(pts), range(len(pts)), k)
    ref, _ = brute_kmedian(pts, k)
    assert c.cost == pytest.approx(ref, abs=1e-9)


def test_exact_matches_enumeration_plane(rng):
    for _ in range(30):
        n = int(rng.integers(3, 10))
        pts = rng.normal(size=(n, 2))
        k = int(rng.integers(1, 4))
        c = exact_kmedian(MetricSpace.euclidean(pts), range(n), k)
        assert c.cost == pytest.approx(brute_kmedian(pts, k)[0], rel=1e-12, abs=1e-12)


def test_cap():
    s = MetricSpace.euclidean(np.random.default_rng(0).normal(size=(60, 2)))
    with pytest.raises(EnumerationCapExceeded):
        exact_kmedian(s, range(60), 4, cap=1000)
    c, how = kmedian_cost(s, range(60), 4, cap=1000)
    assert how == "local" and c > 0


def test_local_search_within_five_of_exact(rng):
    for _ in range(40):
        n = int(rng.integers(4, 13))
        pts = rng.normal(size=(n, 2)) * rng.uniform(0.5, 5)
        k = int(rng.integers(1, 4))
        s = MetricSpace.euclidean(pts)
        ex = exact_kmedian(s, range(n), k).cost
        ls = local_search_kmedian(s, range(n), k).cost
        assert ex - 1e-9 <= ls <= 5 * ex + 1e-9


def test_multi_swap_not_worse(rng):
    pts = rng.normal(size=(10, 2))
    s = MetricSpace.euclidean(pts)
    one = local_search_kmedian(s, range(10), 3).cost
    two = local_search_kmedian(s, range(10), 3, swap_size=2).cost
    assert two <= one + 1e-12


def test_min_labels():
    s = line_space([0, 0, 10, 10, 30])
    assert min_labels_within_budget(s, range(5), 0.5, 5) == 3
    assert min_labels_within_budget(s, range(5), 20, 5) == 2
    assert min_labels_within_budget(s, range(5), 0.5, 2) is None
    assert min_labels_within_budget(s, [], 1, 2) == 0


def test_labelled_cost():
    s = line_space([0, 1, 2, 10, 14])
    assert labelled_cost(s, [1, 1, 1, 2, 2]) == 2.0 + 4.0


def test_medoid_factor_small(rng):
    for _ in range(10):
        pts = rng.normal(size=(6, 2))
        f = medoid_factor_check(pts, 2, grid=7)
        assert 1.0 - 1e-12 <= f <= 2.0 + 1e-9


def test_medoid_factor_hand_instance():
    # two points: any center on the segment costs 2; a point center also costs 2
    assert medoid_factor_check([[0.0], [2.0]], 1) == pytest.approx(1.0)
    # three collinear points 0, 1, 2: best is the middle one either way
    assert medoid_factor_check([[0.0], [1.0], [2.0]], 1) == pytest.approx(1.0)
