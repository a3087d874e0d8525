"""Weighted separation predicates and the separation schedule.

Two points x, y are beta-well-separated w.r.t. weights w when
``min(w(x), w(y)) * d(x, y) >= beta * B``; otherwise they are beta-attached.
"""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np

from .metric import TOL, MetricSpace

BetaSchedule = Callable[[int, int], float]


def beta(t: int, k: int) -> float:
    """8 * 3**(k - t + 2), for 1 <= t <= k + 2 (exact integer arithmetic)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= t <= k + 2:
        raise ValueError(f"beta index t={t} outside [1, {k + 2}]")
    return float(8 * 3 ** (k - t + 2))


def geometric_schedule(ratio: float, anchor: int = 2) -> BetaSchedule:
    """Test-only schedule agreeing with ``beta`` at ``t = anchor`` and shrinking by ``ratio``."""

    def sched(t: int, k: int) -> float:
        if not 1 <= t <= k + 2:
            raise ValueError(f"beta index t={t} outside [1, {k + 2}]")
        return beta(anchor, k) * ratio ** (t - anchor)

    return sched


def separated(wx: float, wy: float, d: float, b: float, budget: float, tol: float = TOL) -> bool:
    """Scalar form: weights and distance already looked up."""
    return min(wx, wy) * d >= b * budget - tol


def _weight(w, p: int) -> float:
    try:
        return w[p]
    except (KeyError, IndexError) as exc:
        raise ValueError(f"no weight for point {p}") from exc


def is_well_separated(space: MetricSpace, x: int, y: int, w: Mapping[int, int], b: float, budget: float) -> bool:
    return separated(_weight(w, x), _weight(w, y), space.distance(x, y), b, budget)


def is_set_well_separated(space: MetricSpace, points: Sequence[int], w, b: float, budget: float) -> bool:
    return all(is_well_separated(space, x, y, w, b, budget) for x, y in combinations(points, 2))


def first_unseparated_pair(space: MetricSpace, points: Sequence[int], w, b: float, budget: float):
    """The first pair (in list order) that is not well-separated, or None."""
    for x, y in combinations(points, 2):
        if not is_well_separated(space, x, y, w, b, budget):
            return x, y
    return None


def is_attached_from(space: MetricSpace, p: int, targets: Sequence[int], w, b: float, budget: float) -> list[bool]:
    return [not is_well_separated(space, p, q, w, b, budget) for q in targets]


def separated_mask(dist_rows: np.ndarray, w_rows: np.ndarray, w_cols: np.ndarray, b: float, budget: float) -> np.ndarray:
    """Elementwise separation test: rows x cols, vectorised."""
    return np.minimum(w_rows[:, None], w_cols[None, :]) * dist_rows >= b * budget - TOL
