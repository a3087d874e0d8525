"""Stream generators and the adaptive lower-bound adversary."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .engine import OnlineEngine
from .greedy import GreedyBaseline
from .metric import MetricSpace, Stream, line_space
from .offline import EXACT_CAP, LOCAL_SEARCH_FACTOR, dedup, exact_on_matrix, labelled_cost, local_search_on_matrix
from .separation import beta

FAMILIES = ("fig1", "lowerbound", "beta-halving", "label-conflict", "planted-random")
BUDGET_FLOOR = 1e-6


@dataclass
class GeneratorSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")


def certify(space: MetricSpace, k: int, cap: int = EXACT_CAP) -> tuple[float, str]:
    """An upper bound on the optimal k-median cost: exact below the cap,
    else the local-search cost (itself an upper bound)."""
    reps, mult, _, ids = dedup(space, range(len(space)))
    if not ids:
        return 0.0, "exact"
    dist = space.pairwise(reps)
    m = len(reps)
    if k >= m or comb(m, k) <= cap:
        return exact_on_matrix(dist, mult, k, cap)[0], "exact"
    return local_search_on_matrix(dist, mult, k)[0], "local"


def _stream(space: MetricSpace, family: str, params: dict, k: int, budget: float, opt: float, how: str) -> Stream:
    meta = {
        "family": family,
        "params": params,
        "k": k,
        "budget": budget,
        "opt_bound": opt,
        "opt_method": how,
    }
    return Stream(space, meta)


def gen_fig1(alpha: int) -> Stream:
    """One point at -2, alpha+1 points at 1, then alpha points at 0; B = 2, k = 2."""
    if alpha < 1:
        raise ValueError("alpha must be a positive integer")
    xs = [-2.0] + [1.0] * (alpha + 1) + [0.0] * alpha
    space = line_space(xs)
    opt, how = certify(space, 2)
    return _stream(space, "fig1", {"alpha": alpha}, 2, 2.0, opt, how)


def gen_beta_halving(m: int = 60, k: int = 3, budget: float = 1.0, eps: float | None = None) -> Stream:
    """Two far pivots, then ``m`` points alternating between two locations just
    inside the midpoint. Separation levels that shrink by less than half keep
    those points glued to the first pivot forever."""
    eps = budget / 100 if eps is None else eps
    b = beta(2, k)
    x = b * budget / 2 - 2 * eps
    y = b * budget / 2 - eps
    xs = [0.0, b * budget] + [x if i % 2 == 0 else y for i in range(m)]
    space = line_space(xs)
    opt, how = certify(space, k)
    return _stream(space, "beta-halving", {"m": m, "k": k, "eps": eps}, k, budget, opt, how)


def gen_label_conflict(
    seed: int = 0,
    span: float = 400.0,
    inset: float = 0.2,
    n_pivot: int = 20,
    n_center: int = 60,
    n_mid: int = 80,
) -> Stream:
    """Six locations in the plane: two heavy anchors, a far singleton, a heavy
    site inward of each anchor, and a heavy site midway between the two inner
    sites, which is close to both of them. k = 6 so OPT = 0."""
    rng = np.random.default_rng(seed)
    jitter = lambda n: int(n + rng.integers(-n // 4, n // 4 + 1))  # noqa: E731
    a = inset * span
    sites = {
        "p1": (0.0, 0.0),
        "p2": (span, 0.0),
        "p3": (span / 2, 12.5 * span),
        "c1": (a, 0.0),
        "c2": (span - a, 0.0),
        "mid": (span / 2, 0.0),
    }
    seq = (
        [sites["p1"]] * jitter(n_pivot)
        + [sites["p2"]] * jitter(n_pivot)
        + [sites["p3"]]
        + [sites["c1"]] * jitter(n_center)
        + [sites["c2"]] * jitter(n_center)
        + [sites["mid"]] * jitter(n_mid)
    )
    space = MetricSpace.euclidean(np.asarray(seq, dtype=np.float64), 2)
    params = {"span": span, "inset": inset, "n_pivot": n_pivot, "n_center": n_center, "n_mid": n_mid}
    opt, how = certify(space, 6)
    return _stream(space, "label-conflict", params, 6, 1.0, opt, how)


def gen_planted(
    clusters: int,
    spread: float,
    n: int,
    dim: int = 2,
    seed: int = 0,
    sep: float = 10.0,
    k: int | None = None,
    cap: int = EXACT_CAP,
) -> Stream:
    """Gaussian blobs in arrival order shuffled by ``seed``.

    ``k`` defaults to the number of blobs. B is the exact k-median optimum
    when enumeration fits under ``cap``, otherwise 5x the local-search cost;
    an optimum of 0 gets a tiny positive floor.
    """
    k = clusters if k is None else k
    rng = np.random.default_rng(seed)
    means = rng.uniform(0, sep * clusters, size=(clusters, dim))
    which = rng.integers(0, clusters, size=n)
    pts = means[which] + spread * rng.standard_normal((n, dim))
    pts = pts[rng.permutation(n)]
    space = MetricSpace.euclidean(pts, 2)
    opt, how = certify(space, k, cap)
    budget = opt if how == "exact" else LOCAL_SEARCH_FACTOR * opt
    budget = max(budget, BUDGET_FLOOR)
    params = {"clusters": clusters, "spread": spread, "n": n, "dim": dim, "sep": sep, "k": k}
    return _stream(space, "planted-random", params, k, budget, opt, how)


def generate(spec: GeneratorSpec) -> Stream:
    p = dict(spec.params)
    if spec.family == "fig1":
        return gen_fig1(int(p.get("alpha", 100)))
    if spec.family == "beta-halving":
        return gen_beta_halving(**p)
    if spec.family == "label-conflict":
        return gen_label_conflict(seed=spec.seed, **p)
    if spec.family == "planted-random":
        return gen_planted(seed=spec.seed, **p)
    raise ValueError("the lowerbound family is adaptive; use run_lower_bound_adversary")


# ------------------------------------------------------------------ adversary


@dataclass
class AdversaryConfig:
    k: int
    budget: float = 1.0
    L: float | None = None
    cluster_size: int | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("the adversary needs k >= 2")
        if self.L is None:
            self.L = 1000.0 * self.k
        if self.cluster_size is None:
            self.cluster_size = 10 * self.k**2
        if self.cluster_size < 10 * self.k**2:
            raise ValueError("cluster_size must be at least 10 k^2")


@dataclass
class AdversaryResult:
    stream: Stream
    labels: list[int]
    cost: float
    opt: float
    branch: str
    phase: int

    @property
    def ratio(self) -> float:
        return self.cost / self.stream.meta["budget"]


class ProtocolError(RuntimeError):
    pass


Labeler = Callable[[np.ndarray], int]


def engine_labeler(k: int, budget: float, dim: int, **kw) -> tuple[Labeler, OnlineEngine]:
    space = MetricSpace("l2", coords=np.zeros((0, dim)))
    eng = OnlineEngine(space, k, budget, **kw)

    def label(point: np.ndarray) -> int:
        space.append(point)
        return eng.process()

    return label, eng


def greedy_labeler(k: int, budget: float, dim: int) -> tuple[Labeler, GreedyBaseline]:
    space = MetricSpace("l2", coords=np.zeros((0, dim)))
    g = GreedyBaseline(space, k, budget)

    def label(point: np.ndarray) -> int:
        space.append(point)
        return g.process()

    return label, g


def run_lower_bound_adversary(alg: Labeler, cfg: AdversaryConfig) -> AdversaryResult:
    """Adaptive adversary in R^k that branches only on the labels it observes."""
    k, B = cfg.k, cfg.budget
    pts: list[np.ndarray] = []
    labels: list[int] = []
    used: set[int] = set()

    def emit(p: np.ndarray) -> int:
        lab = alg(p)
        if not isinstance(lab, (int, np.integer)) or not 1 <= lab <= k:
            raise ProtocolError(f"labeler returned {lab!r}, expected 1..{k}")
        pts.append(p)
        labels.append(int(lab))
        return int(lab)

    for _ in range(cfg.cluster_size):
        used.add(emit(np.zeros(k)))
    branch, phase = "complete", k - 1
    for i in range(1, k):
        q = np.zeros(k)
        q[i - 1] = B
        lab = emit(q)
        if lab not in used:
            for ell in range(1, k - i + 1):
                far = np.zeros(k)
                far[i + ell - 1] = cfg.L * B
                used.add(emit(far))
            branch, phase = "punished", i
            break
        for _ in range(cfg.cluster_size - 1):
            used.add(emit(q))
    space = MetricSpace("l2", coords=np.asarray(pts))
    cost = labelled_cost(space, labels)
    opt, how = certify(space, k)
    params = {"L": cfg.L, "cluster_size": cfg.cluster_size}
    stream = _stream(space, "lowerbound", params, k, B, opt, how)
    return AdversaryResult(stream, labels, cost, opt, branch, phase)
