"""Natural weights over a growing prefix.

The natural weight of ``x`` in a point set ``S`` is the largest number of
points of ``S`` whose distances to ``x`` sum to at most ``2B``. Taking the
smallest distances first is optimal, so it is a prefix-sum search over sorted
distances.

``WeightIndex`` maintains all weights incrementally as points arrive. Points
that share a location (distance exactly 0) are folded into one *site*; every
point at a site has the same weight and the same distances to everything else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import SiteHeaps
from .metric import TOL, MetricSpace


class SequencingError(ValueError):
    pass


def natural_weight_from_distances(dists, budget: float, tol: float = TOL) -> int:
    d = np.sort(np.asarray(dists, dtype=np.float64))
    # cumulative sums are sequential, matching the incremental path
    sums = np.cumsum(d)
    return int(np.searchsorted(sums, 2.0 * budget + tol, side="right"))


def natural_weight(space: MetricSpace, x: int, prefix, budget: float) -> int:
    """Weight of point ``x`` within the point ids ``prefix`` (from scratch)."""
    ids = np.asarray(list(prefix), dtype=np.intp)
    if x not in set(ids.tolist()):
        raise ValueError(f"point {x} is not in the prefix")
    if budget <= 0:
        raise ValueError("budget must be positive")
    return natural_weight_from_distances(space.distances_from(x, ids), budget)


def prefix_weights(space: MetricSpace, n: int, budget: float, ids=None) -> np.ndarray:
    """From-scratch weights in X_n for ``ids`` (default all of X_n)."""
    ids = range(n) if ids is None else ids
    pref = np.arange(n)
    return np.array(
        [natural_weight_from_distances(space.distances_from(int(x), pref), budget) for x in ids],
        dtype=np.int64,
    )


@dataclass(frozen=True)
class WeightSnapshot:
    """Immutable weights for the prefix X_size."""

    size: int
    site_weights: np.ndarray
    site_of: np.ndarray

    def __getitem__(self, point: int) -> int:
        if not 0 <= point < self.size:
            raise KeyError(f"point {point} not in prefix of size {self.size}")
        return int(self.site_weights[self.site_of[point]])

    def weight(self, point: int) -> int:
        return self[point]

    def as_array(self) -> np.ndarray:
        return self.site_weights[self.site_of[: self.size]]


class WeightIndex:
    """Incrementally maintained natural weights, deduplicated by location."""

    def __init__(self, space: MetricSpace, budget: float, tol: float = TOL):
        if not budget > 0:
            raise ValueError("budget must be strictly positive")
        self.space = space
        self.budget = float(budget)
        self.tol = tol
        self.size = 0
        self._heaps = SiteHeaps(2.0 * self.budget, tol)
        self._site_of = np.zeros(64, dtype=np.intp)
        self._rep: list[int] = []
        self._counts = np.zeros(16, dtype=np.int64)
        self._dist = np.zeros((16, 16))
        self._weights = np.zeros(0, dtype=np.int64)

    @property
    def n_sites(self) -> int:
        return len(self._rep)

    @property
    def site_dist(self) -> np.ndarray:
        u = self.n_sites
        return self._dist[:u, :u]

    @property
    def site_counts(self) -> np.ndarray:
        return self._counts[: self.n_sites]

    @property
    def site_weights(self) -> np.ndarray:
        return self._weights

    @property
    def reps(self) -> list[int]:
        """First-arriving point of each site, in site order."""
        return self._rep

    def site_of(self, point: int) -> int:
        if not 0 <= point < self.size:
            raise KeyError(point)
        return int(self._site_of[point])

    @property
    def site_map(self) -> np.ndarray:
        return self._site_of[: self.size]

    def weight(self, point: int) -> int:
        return int(self._weights[self.site_of(point)])

    def __getitem__(self, point: int) -> int:
        return self.weight(point)

    def _grow_sites(self) -> None:
        cap = self._dist.shape[0]
        if self.n_sites < cap:
            return
        dist = np.zeros((2 * cap, 2 * cap))
        dist[:cap, :cap] = self._dist
        self._dist = dist
        counts = np.zeros(2 * cap, dtype=np.int64)
        counts[:cap] = self._counts
        self._counts = counts

    def update_on_arrival(self, x: int) -> int:
        """Register arrival ``x`` (must be the next id) and return its site."""
        if x != self.size:
            raise SequencingError(f"expected arrival {self.size}, got {x}")
        if x >= len(self.space):
            raise SequencingError(f"point {x} is not loaded in the metric")
        if self.size == len(self._site_of):
            grown = np.zeros(2 * self.size, dtype=np.intp)
            grown[: self.size] = self._site_of
            self._site_of = grown
        u = self.n_sites
        if u:
            row = self.space.distances_from(x, self._rep)
            hits = np.flatnonzero(row == 0.0)
        else:
            row = np.zeros(0)
            hits = ()
        if len(hits):
            s = int(hits[0])
            self._counts[s] += 1
            self._heaps.arrive(np.ascontiguousarray(self._dist[:u, s]))
        else:
            s = u
            self._grow_sites()
            self._dist[s, :u] = row
            self._dist[:u, s] = row
            self._dist[s, s] = 0.0
            self._counts[s] = 1
            self._rep.append(x)
            if u:
                self._heaps.arrive(np.ascontiguousarray(row))
            self._heaps.new_site(
                np.ascontiguousarray(self._dist[s, : u + 1]),
                np.ascontiguousarray(self._counts[: u + 1]),
            )
        self._site_of[x] = s
        self.size += 1
        self._weights = self._heaps.weights()
        return s

    def snapshot(self) -> WeightSnapshot:
        return WeightSnapshot(
            self.size, self._weights.copy(), self._site_of[: self.size].copy()
        )
