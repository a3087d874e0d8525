import numpy as np
import pytest

from consistent_kmedian.metric import MetricSpace, line_space


def brute_kmedian(points, k, p=2):
    """Reference k-median by plain enumeration over point subsets (no dedup)."""
    from itertools import combinations

    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    diff = pts[:, None] - pts[None]
    d = np.abs(diff).sum(-1) if p == 1 else np.sqrt((diff**2).sum(-1))
    if k >= n:
        return 0.0, tuple(range(n))
    best, arg = np.inf, None
    for c in combinations(range(n), k):
        v = d[:, c].min(axis=1).sum()
        if v < best - 1e-12:
            best, arg = v, c
    return float(best), arg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def line():
    return line_space


@pytest.fixture
def plane():
    return lambda pts: MetricSpace.euclidean(np.asarray(pts, dtype=float), 2)


# criterion number -> (passed, one-line detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def acceptance_lines():
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}" for n, (ok, detail) in sorted(ACCEPTANCE.items())]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in acceptance_lines():
            terminalreporter.write_line(line)
