"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and same results; used when the extension is not built.
"""

from __future__ import annotations

import heapq
from itertools import combinations, islice

import numpy as np


class SiteHeaps:
    """Per-site max-heaps of the distances counted towards each natural weight."""

    def __init__(self, two_b: float, tol: float):
        self._limit = two_b + tol
        self._heaps: list[list[float]] = []  # negated, heapq is a min-heap
        self._sums: list[float] = []

    def __len__(self) -> int:
        return len(self._heaps)

    def new_site(self, dists, counts) -> int:
        heap: list[float] = []
        total = 0.0
        for j in np.argsort(np.asarray(dists), kind="stable"):
            d = float(dists[j])
            c = int(counts[j])
            take = 0
            while take < c and total + d <= self._limit:
                heapq.heappush(heap, -d)
                total += d
                take += 1
            if take < c:
                break
        self._heaps.append(heap)
        self._sums.append(total)
        return len(self._heaps) - 1

    def arrive(self, dcol) -> None:
        if len(dcol) > len(self._heaps):
            raise ValueError("more distances than sites")
        limit = self._limit
        sums = self._sums
        heaps = self._heaps
        for s, d in enumerate(dcol.tolist()):
            if sums[s] + d <= limit:
                heapq.heappush(heaps[s], -d)
                sums[s] += d
            elif heaps[s]:
                top = -heaps[s][0]
                if d < top:
                    heapq.heapreplace(heaps[s], -d)
                    sums[s] += d - top

    def weight(self, s: int) -> int:
        return len(self._heaps[s])

    def weights(self) -> np.ndarray:
        return np.fromiter((len(h) for h in self._heaps), dtype=np.int64, count=len(self._heaps))


def first_separated_pair(dist, w, cand, threshold):
    cand = np.asarray(cand, dtype=np.intp)
    m = len(cand)
    if m < 2:
        return -1, -1
    sub = dist[np.ix_(cand, cand)]
    wc = w[cand]
    ok = np.minimum(wc[:, None], wc[None, :]) * sub >= threshold
    ok = np.triu(ok, 1)
    rows = np.flatnonzero(ok.any(axis=1))
    if rows.size == 0:
        return -1, -1
    i = rows[0]
    j = np.flatnonzero(ok[i])[0]
    return int(cand[i]), int(cand[j])


def exact_kmedian(dist, mult, k, chunk: int = 20000):
    m = dist.shape[0]
    if k <= 0 or m == 0:
        return (0.0 if m == 0 else float("inf")), ()
    if k >= m:
        return 0.0, tuple(range(m))
    best = float("inf")
    best_combo: tuple = ()
    it = combinations(range(m), k)
    while True:
        block = list(islice(it, chunk))
        if not block:
            break
        idx = np.asarray(block, dtype=np.intp)
        mins = dist[:, idx].min(axis=2)  # (m, chunk)
        # sequential sum over points, matching the compiled kernel bit for bit
        totals = np.cumsum(mult[:, None] * mins, axis=0)[-1]
        j = int(np.argmin(totals))
        if totals[j] < best:
            best = float(totals[j])
            best_combo = block[j]
    return best, tuple(int(c) for c in best_combo)
