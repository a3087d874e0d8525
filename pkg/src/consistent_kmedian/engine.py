"""The online k-median algorithm with irrevocable labels and a budget B.

Each arrival x_i first updates natural weights. If an Add or Exchange operation
applies, estimated centers are recomputed once from X_{i-1} and operations are
applied (Add before Exchange) until none applies. Then x_i takes the label of
its nearest pivot. Every structural change is appended to ``events``.

"Apply an arbitrary applicable operation" is made deterministic: the Add
candidate is the earliest-arriving qualifying point, Exchange candidates are
the lexicographically smallest (label, alpha, gamma), and Add cases 1 and 4
pick the smallest qualifying labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .kernels import first_separated_pair
from .metric import TOL, MetricSpace
from .offline import EXACT_CAP, LOCAL_SEARCH_FACTOR, exact_on_matrix, local_search_on_matrix
from .separation import beta as default_beta
from .weights import WeightIndex

TRACE_SCHEMA = 1


class BudgetViolation(RuntimeError):
    """The run needed more than k labels, which certifies OPT > B."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class AlgorithmState:
    k: int
    budget: float
    pivots: list[int] = field(default_factory=list)
    centers: list[int] = field(default_factory=list)
    T: int = 0
    labels: list[int] = field(default_factory=list)

    @property
    def t(self) -> int:
        return len(self.pivots)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "budget": self.budget,
            "pivots": list(self.pivots),
            "centers": list(self.centers),
            "T": self.T,
            "labels": list(self.labels),
        }


class OnlineEngine:
    def __init__(
        self,
        space: MetricSpace,
        k: int,
        budget: float,
        *,
        solver: str = "auto",
        exact_cap: int = EXACT_CAP,
        beta_schedule: Callable[[int, int], float] = default_beta,
    ):
        if k < 1:
            raise ValueError("k must be >= 1")
        if not budget > 0:
            raise ValueError("budget must be strictly positive")
        if solver not in ("auto", "exact", "local"):
            raise ValueError(f"unknown solver {solver!r}")
        self.space = space
        self.k = k
        self.budget = float(budget)
        self.solver = solver
        self.exact_cap = exact_cap
        self._beta = beta_schedule
        # poly-time mode runs against the inflated budget c * B
        self.effective_budget = self.budget * (LOCAL_SEARCH_FACTOR if solver == "local" else 1)
        self.state = AlgorithmState(k, self.budget)
        self.index = WeightIndex(space, self.effective_budget)
        self.events: list[dict] = [
            {
                "kind": "header",
                "schema": TRACE_SCHEMA,
                "k": k,
                "budget": self.budget,
                "effective_budget": self.effective_budget,
                "solver": solver,
                "metric": space.kind,
            }
        ]
        self.add_counts = [0] * 4
        self.exchange_counts = [0] * 5
        self.outer_loops = 0
        self.phase_changes = 0
        self._w_prev: np.ndarray | None = None
        self._sites_prev = 0
        self._i = -1
        self._finalized = False

    @classmethod
    def from_state(cls, space: MetricSpace, state: AlgorithmState, n: int, **kw) -> "OnlineEngine":
        """Engine that has seen X_n (weights only) and holds ``state``.

        Lets tests drive single operations from hand-built configurations.
        """
        eng = cls(space, state.k, state.budget, **kw)
        for x in range(n):
            eng._w_prev = eng.index.site_weights.copy()
            eng._sites_prev = eng.index.n_sites
            eng.index.update_on_arrival(x)
        eng._i = n - 1
        eng.state = AlgorithmState(
            state.k, state.budget, list(state.pivots), list(state.centers), state.T, list(state.labels)
        )
        return eng

    # ------------------------------------------------------------------ weights

    def beta(self, t: int) -> float:
        if t > self.k + 2:
            raise BudgetViolation(
                f"needs separation level {t} > k+2 = {self.k + 2}; budget B likely below OPT",
                self._diagnostics(),
            )
        return self._beta(t, self.k)

    def _site(self, p: int) -> int:
        return self.index.site_of(p)

    def _w(self, p: int, prev: bool = False) -> int:
        s = self._site(p)
        if prev:
            return int(self._w_prev[s])
        return int(self.index.site_weights[s])

    def _sep(self, p: int, q: int, b: float, prev: bool = False) -> bool:
        d = self.index.site_dist[self._site(p), self._site(q)]
        return min(self._w(p, prev), self._w(q, prev)) * d >= b * self.effective_budget - TOL

    def _diagnostics(self) -> dict:
        return {
            "i": self._i,
            "t": self.state.t,
            "k": self.k,
            "budget": self.budget,
            "pivots": list(self.state.pivots),
        }

    # --------------------------------------------------------------- candidates

    def find_add_candidate(self) -> int | None:
        """Earliest point of X_i that is beta_{t+1}-separated from every pivot."""
        t = self.state.t
        b = self.beta(t + 1)
        w = self.index.site_weights
        dist = self.index.site_dist
        piv = np.array([self._site(p) for p in self.state.pivots], dtype=np.intp)
        ok = np.minimum(w[:, None], w[piv][None, :]) * dist[:, piv] >= b * self.effective_budget - TOL
        hits = np.flatnonzero(ok.all(axis=1))
        if hits.size == 0:
            return None
        return self.index.reps[int(hits[0])]

    def find_exchange_candidate(self) -> tuple[int, int, int] | None:
        """Smallest (j, alpha, gamma) satisfying the four Exchange conditions."""
        t = self.state.t
        b = self.beta(t + 1)
        thr = b * self.effective_budget - TOL
        w = self.index.site_weights
        dist = self.index.site_dist
        piv = np.array([self._site(p) for p in self.state.pivots], dtype=np.intp)
        sep = np.minimum(w[:, None], w[piv][None, :]) * dist[:, piv] >= thr
        n_sep = sep.sum(axis=1)
        for j in range(t):
            pj = piv[j]
            # attached to p_j, separated from all t-1 other pivots, at least as heavy as p_j
            mask = (~sep[:, j]) & (n_sep == t - 1) & (w >= w[pj])
            cand = np.flatnonzero(mask).astype(np.intp)
            if cand.size < 2:
                continue
            a, g = first_separated_pair(np.ascontiguousarray(dist), w, cand, thr)
            if a >= 0:
                reps = self.index.reps
                return j + 1, reps[a], reps[g]
        return None

    # --------------------------------------------------------- estimated centers

    def _solve(self, dist: np.ndarray, mult: np.ndarray) -> tuple[tuple[int, ...], str]:
        m = dist.shape[0]
        k = self.k
        if self.solver == "local" or (self.solver == "auto" and k < m and comb(m, k) > self.exact_cap):
            return local_search_on_matrix(dist, mult, k)[1], "local"
        return exact_on_matrix(dist, mult, k, cap=comb(m, k) if self.solver == "exact" else self.exact_cap)[1], "exact"

    def _estimated_centers(self, n_sites: int, w: np.ndarray, counts: np.ndarray, T: int) -> dict:
        """Estimated centers for the current pivots from a prefix summarised by
        its sites, site weights ``w`` and multiplicities ``counts``."""
        st = self.state
        dist = self.index.site_dist[:n_sites, :n_sites]
        live = np.flatnonzero(counts[:n_sites] > 0)
        y_idx, method = self._solve(dist[np.ix_(live, live)], counts[live].astype(np.float64))
        y_sites = [int(live[i]) for i in y_idx]
        reps = self.index.reps
        piv_sites = [self._site(p) for p in st.pivots[:T]]
        thr = self.beta(T + 1) * self.effective_budget - TOL

        def wd(a: int, b: int) -> float:
            return min(w[a], w[b]) * dist[a, b]

        py = []
        for ys in y_sites:
            scores = [wd(ps, ys) for ps in piv_sites]
            py.append(int(np.argmin(scores)) + 1)
        new_centers = []
        for j in range(1, T + 1):
            pj = st.pivots[j - 1]
            ps = piv_sites[j - 1]
            delta = []
            if j <= len(st.centers):
                cj = st.centers[j - 1]
                cs = self._site(cj)
                if w[cs] > w[ps] and wd(cs, ps) < thr:
                    delta.append(cj)
            for ys, lab in zip(y_sites, py):
                if lab == j and w[ys] > w[ps]:
                    delta.append(reps[ys])
            if not delta or w[ps] >= max(w[self._site(q)] for q in delta):
                new_centers.append(pj)
            else:
                top = max(w[self._site(q)] for q in delta)
                new_centers.append(min(q for q in delta if w[self._site(q)] == top))
        return {
            "offline_centers": [reps[s] for s in y_sites],
            "pivot_of_center": py,
            "centers": new_centers,
            "solver": method,
        }

    def compute_estimated_centers(self) -> list[int]:
        """Recompute c_1..c_T from X_{i-1} with weights w_{i-1}; T = current pivot count."""
        st = self.state
        T = st.t
        u = self._sites_prev
        counts = self.index.site_counts[:u].copy()
        s_new = self._site(self._i)
        if s_new < u:
            counts[s_new] -= 1
        res = self._estimated_centers(u, self._w_prev, counts, T)
        old = list(st.centers)
        st.centers = res["centers"]
        st.T = T
        self._emit(
            "estimated_centers",
            T=T,
            t=st.t,
            pivots=list(st.pivots),
            old_centers=old,
            **res,
        )
        return st.centers

    # --------------------------------------------------------------- operations

    def _weights_of(self, points) -> dict:
        out = {}
        for p in sorted(set(points)):
            prev = int(self._w_prev[self._site(p)]) if self._site(p) < len(self._w_prev) else None
            out[str(p)] = [prev, self._w(p)]
        return out

    def _check_growth(self, new_t: int) -> None:
        if new_t > self.k + 2:
            raise BudgetViolation(
                f"operation would create {new_t} pivots > k+2; budget B likely below OPT",
                self._diagnostics(),
            )

    def apply_add(self, x: int) -> int:
        st = self.state
        t, T = st.t, st.T
        before = list(st.pivots)
        c = st.centers
        case = None
        # case 1: an estimated center separated from every pivot
        b1 = self.beta(t + 1)
        for j in range(1, T + 1):
            if all(self._sep(c[j - 1], p, b1) for p in st.pivots):
                self._check_growth(t + 1)
                st.pivots.append(st.pivots[j - 1])
                st.pivots[j - 1] = c[j - 1]
                case, labels = 1, [j, t + 1]
                break
        if case is None:
            b2 = self.beta(t + 2)
            use_prev = t == T
            attached = [j for j in range(1, T + 1) if not self._sep(c[j - 1], x, b2)]
            qual = [
                j for j in attached
                if self._w(c[j - 1], use_prev) >= self._w(st.pivots[j - 1], use_prev)
            ]
            if not qual:
                self._check_growth(t + 1)
                st.pivots.append(x)
                case, labels = 2, [t + 1]
            elif len(qual) == 1:
                j = qual[0]
                self._check_growth(t + 1)
                st.pivots.append(st.pivots[j - 1])
                st.pivots[j - 1] = x
                case, labels = 3, [j, t + 1]
            else:
                f, g = qual[0], qual[1]
                self._check_growth(t + 2)
                st.pivots.append(st.pivots[f - 1])
                st.pivots.append(st.pivots[g - 1])
                st.pivots[f - 1] = c[f - 1]
                st.pivots[g - 1] = c[g - 1]
                case, labels = 4, [f, g, t + 1, t + 2]
        self.add_counts[case - 1] += 1
        self.phase_changes += 1
        self._emit(
            "add",
            case=case,
            alpha=x,
            T=T,
            t_before=t,
            t_after=st.t,
            labels=labels,
            pivots_before=before,
            pivots_after=list(st.pivots),
            weights=self._weights_of(before + st.pivots + [x] + list(c)),
        )
        return case

    def apply_exchange(self, a: int, g: int, j: int) -> int:
        st = self.state
        t, T = st.t, st.T
        before = list(st.pivots)
        if self.index.site_dist[self._site(a), self._site(g)] <= 0:
            raise AssertionError("exchange points must be at distinct locations")
        if j > T:
            case = 1
        else:
            cj = st.centers[j - 1]
            b2 = self.beta(t + 2)
            if self._w(cj) < self._w(st.pivots[j - 1]):
                case = 2
            elif not self._sep(cj, a, b2):
                case = 3
            elif not self._sep(cj, g, b2):
                case = 4
            else:
                case = 5
        if case <= 3:
            self._check_growth(t + 1)
            st.pivots[j - 1] = a
            st.pivots.append(g)
            labels = [j, t + 1]
        elif case == 4:
            self._check_growth(t + 1)
            st.pivots[j - 1] = g
            st.pivots.append(a)
            labels = [j, t + 1]
        else:
            self._check_growth(t + 2)
            st.pivots.append(a)
            st.pivots.append(g)
            st.pivots[j - 1] = st.centers[j - 1]
            labels = [j, t + 1, t + 2]
        self.exchange_counts[case - 1] += 1
        self.phase_changes += 1
        self._emit(
            "exchange",
            case=case,
            alpha=a,
            gamma=g,
            j=j,
            T=T,
            t_before=t,
            t_after=st.t,
            labels=labels,
            pivots_before=before,
            pivots_after=list(st.pivots),
            weights=self._weights_of(before + st.pivots + [a, g] + list(st.centers)),
        )
        return case

    # ------------------------------------------------------------------ driving

    def _emit(self, kind: str, **data) -> None:
        self.events.append({"kind": kind, "i": self._i, **data})

    def _nearest_pivot(self, x: int) -> int:
        sx = self._site(x)
        d = self.index.site_dist[sx, [self._site(p) for p in self.state.pivots]]
        return int(np.argmin(d)) + 1

    def process(self, x: int | None = None) -> int:
        """Handle the next arrival and return its label."""
        if self._finalized:
            raise RuntimeError("engine already finalized")
        x = self.index.size if x is None else x
        self._w_prev = self.index.site_weights.copy()
        self._sites_prev = self.index.n_sites
        self.index.update_on_arrival(x)
        self._i = x
        st = self.state
        if x == 0:
            st.pivots = [0]
            st.labels.append(1)
            self._emit("init", pivots=[0])
            self._emit("label", label=1)
            return 1
        add = self.find_add_candidate()
        exch = None if add is not None else self.find_exchange_candidate()
        if add is not None or exch is not None:
            self.outer_loops += 1
            self.compute_estimated_centers()
            while True:
                if add is not None:
                    self.apply_add(add)
                elif exch is not None:
                    j, a, g = exch
                    self.apply_exchange(a, g, j)
                else:
                    break
                add = self.find_add_candidate()
                exch = None if add is not None else self.find_exchange_candidate()
        if st.t > self.k:
            self._emit("budget_violation", t=st.t)
            raise BudgetViolation(
                f"{st.t} labels exceed k={self.k}; budget B likely below OPT", self._diagnostics()
            )
        label = self._nearest_pivot(x)
        st.labels.append(label)
        self._emit("label", label=label)
        return label

    def run(self, n: int | None = None) -> list[int]:
        n = len(self.space) if n is None else n
        while self.index.size < n:
            self.process()
        return self.state.labels

    # ------------------------------------------------------------------ results

    def cluster_costs(self) -> list[float]:
        """Per label, the best medoid cost of the points holding that label."""
        return cluster_costs_by_sites(self.index, self.state.labels, self.state.t)

    def final_cost(self) -> float:
        return float(sum(self.cluster_costs()))

    def center_cost(self, centers: list[int]) -> float:
        """Cost when label j pays its distance to ``centers[j-1]``."""
        dist = self.index.site_dist
        site = self.index.site_map
        total = 0.0
        for p, lab in enumerate(self.state.labels):
            if lab <= len(centers):
                total += dist[site[p], self._site(centers[lab - 1])]
        return total

    def finalize(self) -> dict:
        """Close the run: log end-of-stream estimated centers and a summary."""
        if self._finalized:
            return self.events[-1]
        st = self.state
        n = self.index.size
        final = None
        if n:
            self._i = n
            u = self.index.n_sites
            res = self._estimated_centers(u, self.index.site_weights, self.index.site_counts.copy(), st.t)
            final = res["centers"]
            self._emit("final_centers", T=st.t, t=st.t, pivots=list(st.pivots), old_centers=list(st.centers), **res)
        cost = self.final_cost() if n else 0.0
        summary = {
            "kind": "summary",
            "n": n,
            "k": self.k,
            "budget": self.budget,
            "labels_used": st.t,
            "phases": 1 + self.phase_changes if n else 0,
            "outer_loops": self.outer_loops,
            "add_counts": list(self.add_counts),
            "exchange_counts": list(self.exchange_counts),
            "final_cost": cost,
            "ratio": cost / self.budget,
            "estimated_center_cost": float(self.center_cost(final)) if final else 0.0,
        }
        self.events.append(summary)
        self._finalized = True
        return summary


def cluster_costs_by_sites(index: WeightIndex, labels: list[int], n_labels: int) -> list[float]:
    dist = index.site_dist
    site = index.site_map[: len(labels)]
    lab = np.asarray(labels, dtype=np.intp)
    out = []
    for j in range(1, n_labels + 1):
        members = site[lab == j]
        if members.size == 0:
            out.append(0.0)
            continue
        sites, counts = np.unique(members, return_counts=True)
        sub = dist[np.ix_(sites, sites)]
        out.append(float((counts.astype(np.float64) @ sub).min()))
    return out


def run_engine(space: MetricSpace, k: int, budget: float, **kw) -> OnlineEngine:
    eng = OnlineEngine(space, k, budget, **kw)
    eng.run()
    eng.finalize()
    return eng


def dump_events(events: list[dict]) -> str:
    return "".join(json.dumps(ev, sort_keys=True, default=_plain) + "\n" for ev in events)


def write_trace(path, events: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(dump_events(events))


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def replay(events: list[dict]) -> AlgorithmState:
    """Rebuild the final AlgorithmState from a trace without rerunning the algorithm."""
    head = events[0]
    if head.get("kind") != "header" or head.get("schema") != TRACE_SCHEMA:
        raise ValueError("not a trace: missing or unsupported header")
    st = AlgorithmState(head["k"], head["budget"])
    for ev in events[1:]:
        kind = ev["kind"]
        if kind == "init":
            st.pivots = list(ev["pivots"])
        elif kind == "estimated_centers":
            st.centers = list(ev["centers"])
            st.T = ev["T"]
        elif kind in ("add", "exchange"):
            if ev["pivots_before"] != st.pivots:
                raise ValueError(f"trace inconsistent at arrival {ev['i']}: pivots do not chain")
            st.pivots = list(ev["pivots_after"])
        elif kind == "label":
            if ev["i"] != len(st.labels):
                raise ValueError(f"label for arrival {ev['i']} out of order")
            st.labels.append(ev["label"])
    return st
