"""The natural greedy baseline.

It keeps exactly as many labels as the prefix needs to stay within the budget,
and otherwise puts each arrival where it raises the clustering cost least.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .metric import TOL, MetricSpace
from .offline import EXACT_CAP, exact_on_matrix, local_search_on_matrix
from .weights import WeightIndex


class GreedyBaseline:
    def __init__(self, space: MetricSpace, k: int, budget: float, *, exact_cap: int = EXACT_CAP):
        if not budget > 0:
            raise ValueError("budget must be strictly positive")
        self.space = space
        self.k = k
        self.budget = float(budget)
        self.exact_cap = exact_cap
        self.index = WeightIndex(space, self.budget)
        self.labels: list[int] = []
        self.t = 0
        self.infeasible = False
        self.approximate = False
        self._counts: list[np.ndarray] = []
        self.events: list[dict] = [{"kind": "header", "schema": 1, "k": k, "budget": self.budget, "algorithm": "greedy"}]

    def _prefix_cost(self, t: int) -> float:
        counts = self.index.site_counts.astype(np.float64)
        dist = self.index.site_dist
        m = dist.shape[0]
        if t >= m:
            return 0.0
        if comb(m, t) <= self.exact_cap:
            return exact_on_matrix(dist, counts, t, self.exact_cap)[0]
        self.approximate = True
        return local_search_on_matrix(dist, counts, t)[0]

    def _medoid_cost(self, counts: np.ndarray, extra: int | None = None) -> float:
        members = np.flatnonzero(counts)
        cand = members if extra is None else np.union1d(members, [extra])
        dist = self.index.site_dist
        totals = counts[members].astype(np.float64) @ dist[np.ix_(members, cand)]
        if extra is not None:
            totals = totals + dist[extra, cand]
        return float(totals.min()) if totals.size else 0.0

    def process(self, x: int | None = None) -> int:
        x = self.index.size if x is None else x
        s = self.index.update_on_arrival(x)
        u = self.index.n_sites
        for c in self._counts:
            if len(c) < u:
                c.resize(u, refcheck=False)
        mint = False
        if self.t == 0:
            mint = True
        elif not self.infeasible and self._prefix_cost(self.t) > self.budget + TOL:
            if self.t < self.k:
                mint = True
            else:
                self.infeasible = True
        if mint:
            self.t += 1
            self._counts.append(np.zeros(u, dtype=np.int64))
            label = self.t
            self.events.append({"kind": "mint", "i": x, "label": label})
        else:
            best, label = np.inf, 1
            for j, c in enumerate(self._counts, 1):
                inc = self._medoid_cost(c, s) - self._medoid_cost(c)
                if inc < best - TOL:
                    best, label = inc, j
        self._counts[label - 1][s] += 1
        self.labels.append(label)
        self.events.append({"kind": "label", "i": x, "label": label})
        return label

    def run(self, n: int | None = None) -> list[int]:
        n = len(self.space) if n is None else n
        while self.index.size < n:
            self.process()
        return self.labels

    def cost(self) -> float:
        return float(sum(self._medoid_cost(c) for c in self._counts))

    def summary(self) -> dict:
        c = self.cost()
        return {
            "n": len(self.labels),
            "k": self.k,
            "budget": self.budget,
            "labels_used": self.t,
            "final_cost": c,
            "ratio": c / self.budget,
            "infeasible": self.infeasible,
        }


def run_greedy(space: MetricSpace, k: int, budget: float, **kw) -> GreedyBaseline:
    g = GreedyBaseline(space, k, budget, **kw)
    g.run()
    return g
