"""Offline k-median with centers drawn from the clustered points.

Points sharing a location are solved once with a multiplicity, which keeps the
exact solver usable on streams with heavy duplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from .kernels import exact_kmedian_kernel
from .metric import TOL, MetricSpace

EXACT_CAP = 10**6
LOCAL_SEARCH_FACTOR = 5


class EnumerationCapExceeded(ValueError):
    """Raised when exact enumeration would exceed the configured cap; use local search."""


@dataclass
class Clustering:
    centers: tuple[int, ...]
    assignment: dict[int, int] = field(repr=False)
    cost: float
    k: int
    method: str = "exact"

    def clusters(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {c: [] for c in self.centers}
        for p, c in self.assignment.items():
            out[c].append(p)
        return out


def cost(space: MetricSpace, S: Sequence[int], c: int) -> float:
    """Sum of distances from the points of ``S`` to ``c``."""
    if len(S) == 0:
        return 0.0
    return float(np.sum(space.distances_from(c, list(S))))


def dedup(space: MetricSpace, ids: Sequence[int]):
    """Group exact duplicates.

    Returns ``(reps, mult, inverse, ids)``: representatives in arrival order,
    their multiplicities, for each sorted input position the index of its rep,
    and the sorted input ids.
    """
    ids = sorted(int(i) for i in ids)
    reps: list[int] = []
    inverse = np.empty(len(ids), dtype=np.intp)
    if space.kind != "matrix" and ids:
        pts = space.coords[ids]
        _, first, inv = np.unique(pts, axis=0, return_index=True, return_inverse=True)
        inv = inv.reshape(-1)
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        reps = [ids[first[j]] for j in order]
        inverse[:] = rank[inv]
    else:
        for pos, i in enumerate(ids):
            if reps:
                row = space.distances_from(i, reps)
                hit = np.flatnonzero(row == 0.0)
                if hit.size:
                    inverse[pos] = hit[0]
                    continue
            inverse[pos] = len(reps)
            reps.append(i)
    mult = np.bincount(inverse, minlength=len(reps)).astype(np.float64)
    return reps, mult, inverse, ids


def assignment_cost(dist: np.ndarray, mult: np.ndarray, centers: Sequence[int]) -> float:
    if len(centers) == 0:
        return float("inf") if len(mult) else 0.0
    mins = dist[:, list(centers)].min(axis=1)
    return float(np.cumsum(mult * mins)[-1]) if len(mins) else 0.0


def exact_on_matrix(dist: np.ndarray, mult: np.ndarray, k: int, cap: int = EXACT_CAP):
    """(cost, centers) minimising the multiplicity-weighted cost; lexicographic ties."""
    m = dist.shape[0]
    if k >= m:
        return 0.0, tuple(range(m))
    if comb(m, k) > cap:
        raise EnumerationCapExceeded(f"C({m},{k}) = {comb(m, k)} subsets exceeds cap {cap}")
    return exact_kmedian_kernel(np.ascontiguousarray(dist, dtype=np.float64), np.ascontiguousarray(mult, dtype=np.float64), k)


def _farthest_first(dist: np.ndarray, k: int) -> list[int]:
    centers = [0]
    near = dist[:, 0].copy()
    while len(centers) < k:
        nxt = int(np.argmax(near))
        if near[nxt] <= 0:
            # fewer than k distinct sites reachable; fill with unused indices
            nxt = next(i for i in range(dist.shape[0]) if i not in centers)
        centers.append(nxt)
        near = np.minimum(near, dist[:, nxt])
    return centers


def local_search_on_matrix(dist: np.ndarray, mult: np.ndarray, k: int, swap_size: int = 1, max_rounds: int = 10_000):
    """Best-improvement swap local search from farthest-first seeding."""
    m = dist.shape[0]
    if k >= m:
        return 0.0, tuple(range(m))
    centers = _farthest_first(dist, k)
    current = assignment_cost(dist, mult, centers)
    for _ in range(max_rounds):
        if swap_size == 1:
            best_cost, best_swap = _best_single_swap(dist, mult, centers)
        else:
            best_cost, best_swap = _best_multi_swap(dist, mult, centers, swap_size)
        if best_swap is None or not best_cost < current - 1e-12 * max(1.0, current):
            break
        out, inn = best_swap
        centers = sorted((set(centers) - set(out)) | set(inn))
        current = assignment_cost(dist, mult, centers)
    centers = sorted(centers)
    return assignment_cost(dist, mult, centers), tuple(int(c) for c in centers)


def _best_single_swap(dist, mult, centers):
    cset = set(centers)
    cols = dist[:, centers]
    order = np.argsort(cols, axis=1, kind="stable")
    rows = np.arange(dist.shape[0])
    d1 = cols[rows, order[:, 0]]
    d2 = cols[rows, order[:, 1]] if len(centers) > 1 else np.full(len(rows), np.inf)
    near = np.asarray(centers)[order[:, 0]]
    outside = np.array([i for i in range(dist.shape[0]) if i not in cset], dtype=np.intp)
    best_cost, best_swap = np.inf, None
    for c in sorted(centers):
        base = np.where(near == c, d2, d1)
        totals = mult @ np.minimum(base[:, None], dist[:, outside])
        j = int(np.argmin(totals))
        if totals[j] < best_cost:
            best_cost, best_swap = float(totals[j]), ((c,), (int(outside[j]),))
    return best_cost, best_swap


def _best_multi_swap(dist, mult, centers, size):
    outside = [i for i in range(dist.shape[0]) if i not in set(centers)]
    best_cost, best_swap = np.inf, None
    for s in range(1, size + 1):
        for out in combinations(sorted(centers), s):
            keep = [c for c in centers if c not in out]
            for inn in combinations(outside, s):
                total = assignment_cost(dist, mult, keep + list(inn))
                if total < best_cost:
                    best_cost, best_swap = total, (out, inn)
    return best_cost, best_swap


def _build(space, S, k, method, solver, **kw) -> Clustering:
    reps, mult, inverse, ids = dedup(space, S)
    if not ids:
        return Clustering((), {}, 0.0, k, method)
    dist = space.pairwise(reps)
    _, idx = solver(dist, mult, k, **kw)
    centers = tuple(sorted(reps[i] for i in idx))
    if k >= len(ids):
        centers = tuple(ids)
    # assign every point to its nearest center, ties to the smallest center id
    cidx = [reps.index(c) if c in reps else None for c in centers]
    site_centers = sorted({ci for ci in cidx if ci is not None})
    near = np.asarray(site_centers)[np.argmin(dist[:, site_centers], axis=1)]
    center_of_site = {ci: reps[ci] for ci in site_centers}
    assignment = {}
    for pos, p in enumerate(ids):
        s = inverse[pos]
        assignment[p] = p if p in centers else center_of_site[int(near[s])]
    total = float(sum(space.distance(p, c) for p, c in assignment.items()))
    return Clustering(centers, assignment, total, k, method)


def exact_kmedian(space: MetricSpace, S: Sequence[int], k: int, cap: int = EXACT_CAP) -> Clustering:
    return _build(space, S, k, "exact", exact_on_matrix, cap=cap)


def local_search_kmedian(space: MetricSpace, S: Sequence[int], k: int, swap_size: int = 1) -> Clustering:
    return _build(space, S, k, "local", local_search_on_matrix, swap_size=swap_size)


def solve_on_matrix(dist: np.ndarray, mult: np.ndarray, k: int, cap: int = EXACT_CAP):
    """Exact when the enumeration fits under ``cap``, else local search.

    Returns ``(cost, centers, method)``.
    """
    m = dist.shape[0]
    if k >= m or comb(m, k) <= cap:
        c, idx = exact_on_matrix(dist, mult, k, cap)
        return c, idx, "exact"
    c, idx = local_search_on_matrix(dist, mult, k)
    return c, idx, "local"


def kmedian_cost(space: MetricSpace, S: Sequence[int], k: int, cap: int = EXACT_CAP) -> tuple[float, str]:
    """Optimal (or, above the cap, local-search) cost and which method produced it."""
    reps, mult, _, ids = dedup(space, S)
    if not ids:
        return 0.0, "exact"
    c, _, method = solve_on_matrix(space.pairwise(reps), mult, k, cap)
    return c, method


def labelled_cost(space: MetricSpace, labels: Sequence[int]) -> float:
    """Cost of a labelling: each label class pays its best medoid."""
    lab = np.asarray(labels)
    total = 0.0
    for j in np.unique(lab):
        reps, mult, _, _ = dedup(space, np.flatnonzero(lab == j).tolist())
        total += float((mult @ space.pairwise(reps)).min())
    return total


def min_labels_within_budget(space: MetricSpace, S: Sequence[int], budget: float, k_max: int, cap: int = EXACT_CAP):
    """Smallest t <= k_max with exact t-median cost <= budget; None if infeasible."""
    reps, mult, _, ids = dedup(space, S)
    if not ids:
        return 0
    dist = space.pairwise(reps)
    for t in range(1, k_max + 1):
        c, _ = exact_on_matrix(dist, mult, t, cap)
        if c <= budget + TOL:
            return t
    return None


def clients_centers_opt(dist: np.ndarray, k: int, chunk: int = 20000) -> float:
    """Optimal k-median cost with clients on rows and candidate centers on columns."""
    n_cand = dist.shape[1]
    if k >= n_cand:
        return float(dist.min(axis=1).sum())
    best = np.inf
    it = combinations(range(n_cand), k)
    while True:
        block = [c for _, c in zip(range(chunk), it)]
        if not block:
            break
        idx = np.asarray(block, dtype=np.intp)
        totals = dist[:, idx].min(axis=2).sum(axis=0)
        best = min(best, float(totals.min()))
    return best


def medoid_factor_check(coords, k: int, grid: int = 11, p: int = 2) -> float:
    """Ratio of the centers-from-input optimum to the optimum over input plus a grid.

    The grid spans the bounding box with ``grid`` points per axis.
    """
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts.shape[1])
    cand = np.unique(np.vstack([pts, mesh]), axis=0)
    diff = pts[:, None, :] - cand[None, :, :]
    if p == 1:
        d_all = np.abs(diff).sum(axis=2)
    else:
        d_all = np.sqrt((diff**2).sum(axis=2))
    diff_s = pts[:, None, :] - pts[None, :, :]
    d_self = np.abs(diff_s).sum(axis=2) if p == 1 else np.sqrt((diff_s**2).sum(axis=2))
    restricted = clients_centers_opt(d_self, k)
    relaxed = clients_centers_opt(d_all, k)
    if relaxed <= TOL:
        return 1.0
    return restricted / relaxed
