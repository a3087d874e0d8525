"""Independent verification of engine traces.

Everything here is recomputed from the trace, the stream and (B, k): natural
weights are evaluated from scratch on raw points (no site folding, no heaps),
and every Add/Exchange event is re-derived from its recorded inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .metric import TOL, MetricSpace
from .offline import exact_on_matrix, dedup
from .separation import beta as default_beta

SECTIONS = (
    "trace_consistency",
    "labels",
    "feasibility",
    "well_separation",
    "operations",
    "maximality",
    "estimated_centers",
    "inner_steps",
    "offline_attachment",
    "center_attachment",
    "cross_phase",
    "far_points",
    "cluster_size",
    "cluster_cost",
    "total_cost",
)


def g_const(k: int) -> float:
    """Per-phase cost multiplier: beta_1 (2k^3 + 3k^2 + 5k + 1) + 2k + 4."""
    return default_beta(1, k) * (2 * k**3 + 3 * k**2 + 5 * k + 1) + 2 * k + 4


@dataclass
class Section:
    checked: int = 0
    failures: list = field(default_factory=list)
    skipped: int = 0
    note: str = ""

    @property
    def status(self) -> str:
        if self.failures:
            return "fail"
        return "pass" if self.checked else "n/a"

    def check(self, ok: bool, witness: dict | None = None) -> bool:
        self.checked += 1
        if not ok:
            self.failures.append(witness or {})
        return ok


@dataclass
class AuditReport:
    sections: dict = field(default_factory=lambda: {name: Section() for name in SECTIONS})
    summary: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Section:
        return self.sections[name]

    @property
    def ok(self) -> bool:
        return all(s.status != "fail" for s in self.sections.values())

    def failed(self) -> list[str]:
        return [n for n, s in self.sections.items() if s.status == "fail"]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failed": self.failed(),
            "summary": self.summary,
            "sections": {
                n: {
                    "status": s.status,
                    "checked": s.checked,
                    "skipped": s.skipped,
                    "note": s.note,
                    "failures": s.failures[:20],
                    "n_failures": len(s.failures),
                }
                for n, s in self.sections.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1, default=float)


class _Weights:
    """From-scratch natural weights of raw points within a prefix X_size."""

    def __init__(self, space: MetricSpace, n: int, budget: float):
        self.dist = space.pairwise(list(range(n))) if n else np.zeros((0, 0))
        self.limit = 2.0 * budget + TOL
        self._cache: dict = {}

    def __call__(self, size: int, p: int) -> int:
        key = (size, p)
        w = self._cache.get(key)
        if w is None:
            row = np.sort(self.dist[p, :size])
            w = int(np.searchsorted(np.cumsum(row), self.limit, side="right"))
            self._cache[key] = w
        return w

    def all(self, size: int) -> np.ndarray:
        block = np.sort(self.dist[:size, :size], axis=1)
        return (np.cumsum(block, axis=1) <= self.limit).sum(axis=1)


class _Ctx:
    def __init__(self, space, k, budget, beta_fn, n):
        self.space = space
        self.k = k
        self.B = budget
        self.beta_fn = beta_fn
        self.W = _Weights(space, n, budget)
        self.d = self.W.dist

    def beta(self, t):
        if not 1 <= t <= self.k + 2:
            return None
        return self.beta_fn(t, self.k)

    def wd(self, size, a, b):
        return min(self.W(size, a), self.W(size, b)) * self.d[a, b]

    def sep(self, size, a, b, level):
        return self.wd(size, a, b) >= level * self.B - TOL


def _nearest(d, x, pivots):
    return int(np.argmin(d[x, pivots])) + 1


# ----------------------------------------------------------------- operations


def expected_add(ctx: _Ctx, i: int, pivots, centers, T: int, alpha: int):
    """Recompute an Add operation; returns (case, pivots_after) or None if
    a needed separation level is out of range."""
    t = len(pivots)
    size = i + 1
    b1 = ctx.beta(t + 1)
    if b1 is None:
        return None
    out = list(pivots)
    for j in range(1, T + 1):
        cj = centers[j - 1]
        if all(ctx.sep(size, cj, p, b1) for p in pivots):
            out.append(out[j - 1])
            out[j - 1] = cj
            return 1, out
    b2 = ctx.beta(t + 2)
    if b2 is None:
        return None
    wsize = i if t == T else size
    qual = [
        j
        for j in range(1, T + 1)
        if not ctx.sep(size, centers[j - 1], alpha, b2)
        and ctx.W(wsize, centers[j - 1]) >= ctx.W(wsize, pivots[j - 1])
    ]
    if not qual:
        return 2, out + [alpha]
    if len(qual) == 1:
        j = qual[0]
        out.append(out[j - 1])
        out[j - 1] = alpha
        return 3, out
    f, g = qual[:2]
    out += [out[f - 1], out[g - 1]]
    out[f - 1] = centers[f - 1]
    out[g - 1] = centers[g - 1]
    return 4, out


def expected_exchange(ctx: _Ctx, i: int, pivots, centers, T: int, j: int, a: int, g: int):
    t = len(pivots)
    size = i + 1
    out = list(pivots)
    if j > T:
        case = 1
    else:
        cj = centers[j - 1]
        b2 = ctx.beta(t + 2)
        if b2 is None:
            return None
        if ctx.W(size, cj) < ctx.W(size, pivots[j - 1]):
            case = 2
        elif not ctx.sep(size, cj, a, b2):
            case = 3
        elif not ctx.sep(size, cj, g, b2):
            case = 4
        else:
            case = 5
    if case <= 3:
        out[j - 1] = a
        out.append(g)
    elif case == 4:
        out[j - 1] = g
        out.append(a)
    else:
        out += [a, g]
        out[j - 1] = centers[j - 1]
    return case, out


def exchange_conditions(ctx: _Ctx, size: int, pivots, j: int, a: int, g: int) -> bool:
    t = len(pivots)
    b = ctx.beta(t + 1)
    if b is None or a == g:
        return False
    pj = pivots[j - 1]
    for x in (a, g):
        if ctx.sep(size, x, pj, b):
            return False
        if ctx.W(size, x) < ctx.W(size, pj):
            return False
    group = [p for l, p in enumerate(pivots, 1) if l != j] + [a, g]
    return all(ctx.sep(size, x, y, b) for x, y in combinations(group, 2))


def _applicable(ctx: _Ctx, size: int, pivots) -> dict | None:
    """Any Add or Exchange applicable w.r.t. the weights of X_size (full scan)."""
    t = len(pivots)
    b = ctx.beta(t + 1)
    if b is None:
        return None
    w = ctx.W.all(size)
    d = ctx.d[:size, :size]
    thr = b * ctx.B - TOL
    sep = np.minimum(w[:, None], w[pivots][None, :]) * d[:, pivots] >= thr
    hits = np.flatnonzero(sep.all(axis=1))
    if hits.size:
        return {"op": "add", "alpha": int(hits[0])}
    n_sep = sep.sum(axis=1)
    for j in range(t):
        cand = np.flatnonzero((~sep[:, j]) & (n_sep == t - 1) & (w >= w[pivots[j]]))
        if cand.size < 2:
            continue
        sub = np.minimum(w[cand][:, None], w[cand][None, :]) * d[np.ix_(cand, cand)] >= thr
        pairs = np.argwhere(np.triu(sub, 1))
        if len(pairs):
            a, g = pairs[0]
            return {"op": "exchange", "j": j + 1, "alpha": int(cand[a]), "gamma": int(cand[g])}
    return None


def _recompute_centers(ctx: _Ctx, size: int, pivots, old_centers, ys, T: int):
    """Estimated centers from recorded offline centers, with from-scratch weights."""
    W = lambda p: ctx.W(size, p)  # noqa: E731
    b = ctx.beta(T + 1)
    py = []
    for y in ys:
        scores = [ctx.wd(size, p, y) for p in pivots[:T]]
        py.append(int(np.argmin(scores)) + 1)
    out = []
    for j in range(1, T + 1):
        pj = pivots[j - 1]
        delta = []
        if j <= len(old_centers):
            cj = old_centers[j - 1]
            if W(cj) > W(pj) and b is not None and not ctx.sep(size, cj, pj, b):
                delta.append(cj)
        delta += [y for y, lab in zip(ys, py) if lab == j and W(y) > W(pj)]
        if not delta or W(pj) >= max(W(q) for q in delta):
            out.append(pj)
        else:
            top = max(W(q) for q in delta)
            out.append(min(q for q in delta if W(q) == top))
    return py, out


# ------------------------------------------------------------------- phases


@dataclass
class PhaseRecord:
    T: int
    size: int  # |X(T)|
    start: int  # |X(T^-)|
    pivots: list
    centers: list
    ys: list
    py: list


def _inner_step(ctx, rep, i, T, t, pivots, centers):
    """Separation and the (a)/(b)/(c) alternatives after an inner step."""
    wsize = i if t == T else i + 1
    bt = ctx.beta(t)
    if bt is not None:
        for x, y in combinations(pivots, 2):
            rep["inner_steps"].check(
                ctx.sep(wsize, x, y, bt),
                {"i": i, "t": t, "pair": [x, y], "what": "pivots not separated"},
            )
    b = ctx.beta(t + 1)
    if b is None:
        rep["inner_steps"].skipped += 1
        return
    f = ctx.beta(T) * (t - T)
    for j in range(1, T + 1):
        cj, pj = centers[j - 1], pivots[j - 1]
        a_ok = all(ctx.sep(i + 1, cj, p, b) for p in pivots)
        b_ok = not ctx.sep(wsize, cj, pj, b)
        c_ok = ctx.wd(wsize, cj, pj) < f * ctx.B + TOL and ctx.W(wsize, cj) < ctx.W(wsize, pj)
        rep["inner_steps"].check(
            a_ok or b_ok or c_ok,
            {"i": i, "t": t, "T": T, "j": j, "c": cj, "p": pj, "what": "none of (a)/(b)/(c)"},
        )


def _phase_checks(ctx: _Ctx, rep: AuditReport, rec: PhaseRecord, prev: PhaseRecord | None, labels, gk: float):
    T, size = rec.T, rec.size
    W = lambda p: ctx.W(size, p)  # noqa: E731
    b = ctx.beta(T + 1)
    lab = np.asarray(labels[:size])
    # each offline center is attached to its pivot
    for y, j in zip(rec.ys, rec.py):
        rep["offline_attachment"].check(
            b is not None and not ctx.sep(size, y, rec.pivots[j - 1], b),
            {"T": T, "y": y, "pivot": rec.pivots[j - 1]},
        )
    for j in range(1, T + 1):
        c, p = rec.centers[j - 1], rec.pivots[j - 1]
        ok = b is not None and not ctx.sep(size, c, p, b) and W(c) >= W(p) and ((W(c) == W(p)) == (c == p))
        rep["center_attachment"].check(ok, {"T": T, "j": j, "c": c, "p": p, "w_c": W(c), "w_p": W(p)})
        members = np.flatnonzero(lab == j)
        rep["cluster_size"].check(
            len(members) <= (2 * ctx.k + 1) * T * W(c),
            {"T": T, "j": j, "size": int(len(members)), "w_c": W(c)},
        )
        cst = float(ctx.d[c, members].sum()) if len(members) else 0.0
        rep["cluster_cost"].check(
            cst <= T * gk * ctx.B + TOL, {"T": T, "j": j, "cost": cst, "bound": T * gk * ctx.B}
        )
    # points labelled during this phase, split by the clustering induced by P_T
    centers_order = list(rec.pivots) + list(rec.ys)
    new = np.arange(rec.start, size)
    if len(new):
        near = np.argmin(ctx.d[np.ix_(new, centers_order)], axis=1)
        bT1 = b if b is not None else np.inf
        for j in range(1, T + 1):
            pj = rec.pivots[j - 1]
            far = []
            for x, c in zip(new, near):
                if lab[x] != j or c < T:
                    continue
                h = c - T
                if rec.py[h] != j:
                    far.append(int(x))
            fc = float(ctx.d[pj, far].sum()) if far else 0.0
            rep["far_points"].check(
                fc <= ctx.k * (bT1 + 2) * ctx.B + TOL and len(far) <= ctx.k * W(pj),
                {"T": T, "j": j, "n_far": len(far), "cost": fc, "w_p": W(pj)},
            )
    # relation to the previous non-intermediate phase
    if prev is not None:
        Tm = prev.T
        for j in range(1, Tm + 1):
            c_old = prev.centers[j - 1]
            pj = rec.pivots[j - 1]
            w_old = ctx.W(prev.size, c_old)
            a_ok = w_old <= W(pj) and w_old * ctx.d[c_old, pj] <= ctx.beta(Tm) * (T - Tm) * ctx.B + TOL
            b_ok = b is not None and not ctx.sep(size, c_old, pj, b)
            rep["cross_phase"].check(a_ok or b_ok, {"T": T, "T_prev": Tm, "j": j, "c_prev": c_old, "p": pj})


# -------------------------------------------------------------------- driver


def audit_trace(
    events: Sequence[dict],
    space: MetricSpace,
    *,
    maximality: bool = False,
    beta_schedule=default_beta,
) -> AuditReport:
    """Audit an engine trace against the stream it was produced from."""
    rep = AuditReport()
    head = events[0]
    if head.get("kind") != "header":
        rep["trace_consistency"].check(False, {"what": "missing header"})
        return rep
    k = int(head["k"])
    B = float(head.get("effective_budget", head["budget"]))
    label_events = [e for e in events if e["kind"] == "label"]
    n = len(label_events)
    ctx = _Ctx(space, k, B, beta_schedule, n)
    gk = g_const(k)
    d = ctx.d
    labels: list[int] = []
    pivots: list[int] = []
    centers: list[int] = []
    T = 0
    records: list[PhaseRecord] = []
    max_t = 0
    try:
        for ev in events[1:]:
            kind = ev["kind"]
            i = ev.get("i")
            tc = rep["trace_consistency"]
            if kind == "init":
                tc.check(i == 0 and ev["pivots"] == [0], {"i": i, "what": "bad init"})
                pivots = [0]
            elif kind in ("estimated_centers", "final_centers"):
                size = i if kind == "estimated_centers" else n
                tc.check(ev["pivots"] == pivots, {"i": i, "what": "center event pivots differ from replay"})
                tc.check(ev["old_centers"] == centers, {"i": i, "what": "old centers differ from replay"})
                if kind == "estimated_centers":
                    tc.check(ev["T"] == len(pivots), {"i": i, "what": "T differs from pivot count"})
                Tn = len(pivots)
                py, cs = _recompute_centers(ctx, size, pivots, centers, ev["offline_centers"], Tn)
                rep["estimated_centers"].check(
                    py == ev["pivot_of_center"] and cs == ev["centers"],
                    {"i": i, "expected": cs, "recorded": ev["centers"], "expected_py": py},
                )
                rec = PhaseRecord(
                    Tn, size, records[-1].size if records else 0, list(pivots), list(ev["centers"]),
                    list(ev["offline_centers"]), list(ev["pivot_of_center"]),
                )
                _phase_checks(ctx, rep, rec, records[-1] if records else None, labels, gk)
                records.append(rec)
                if kind == "estimated_centers":
                    centers = list(ev["centers"])
                    T = Tn
                    _inner_step(ctx, rep, i, T, T, pivots, centers)
            elif kind in ("add", "exchange"):
                tc.check(ev["pivots_before"] == pivots, {"i": i, "what": "pivots_before differs from replay"})
                tc.check(ev.get("T") == T, {"i": i, "what": "T differs from replay"})
                size = i + 1
                ops = rep["operations"]
                b = ctx.beta(len(pivots) + 1)
                if kind == "add":
                    a = ev["alpha"]
                    valid = 0 <= a <= i and b is not None and all(ctx.sep(size, a, p, b) for p in pivots)
                    exp = expected_add(ctx, i, pivots, centers, T, a) if valid else None
                else:
                    a, g, j = ev["alpha"], ev["gamma"], ev["j"]
                    valid = max(a, g) <= i and 1 <= j <= len(pivots) and exchange_conditions(ctx, size, pivots, j, a, g)
                    exp = expected_exchange(ctx, i, pivots, centers, T, j, a, g) if valid else None
                ok = exp is not None and exp[0] == ev["case"] and exp[1] == ev["pivots_after"]
                ops.check(ok, {"i": i, "kind": kind, "recorded": [ev["case"], ev["pivots_after"]], "expected": exp})
                if maximality:
                    first = _applicable(ctx, size, pivots)
                    want = {"op": kind, "alpha": ev["alpha"]}
                    if kind == "exchange":
                        want.update(j=ev["j"], gamma=ev["gamma"])
                    rep["maximality"].check(first == want, {"i": i, "first_applicable": first, "applied": want})
                pivots = list(ev["pivots_after"])
                max_t = max(max_t, len(pivots))
                _inner_step(ctx, rep, i, T, len(pivots), pivots, centers)
            elif kind == "label":
                tc.check(i == len(labels), {"i": i, "what": "label out of order"})
                t = len(pivots)
                max_t = max(max_t, t)
                rep["feasibility"].check(t <= k, {"i": i, "t": t, "k": k})
                exp = _nearest(d, i, pivots)
                rep["labels"].check(ev["label"] == exp, {"i": i, "label": ev["label"], "nearest": exp})
                labels.append(ev["label"])
                bt = ctx.beta(t)
                if bt is not None:
                    bad = [(x, y) for x, y in combinations(pivots, 2) if not ctx.sep(i + 1, x, y, bt)]
                    rep["well_separation"].check(
                        not bad,
                        {
                            "i": i,
                            "t": t,
                            "pairs": bad[:3],
                            "wd": [ctx.wd(i + 1, x, y) for x, y in bad[:3]],
                            "threshold": bt * B,
                        },
                    )
                if maximality:
                    rep["maximality"].check(_applicable(ctx, i + 1, pivots) is None, {"i": i, "what": "operation left applicable"})
            elif kind == "summary":
                costs = cluster_costs(d, labels)
                total = float(sum(costs))
                rep["total_cost"].check(
                    total <= k * k * gk * B + TOL and abs(total - ev["final_cost"]) <= 1e-6 * max(1.0, total),
                    {"cost": total, "recorded": ev["final_cost"], "bound": k * k * gk * B},
                )
                rep["trace_consistency"].check(ev["labels_used"] == len(pivots), {"what": "summary label count"})
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        rep["trace_consistency"].check(False, {"what": "malformed trace", "error": repr(exc)})
    rep["trace_consistency"].check(len(labels) == n)
    rep.summary = {"n": n, "k": k, "budget": B, "max_pivots": max_t, "phases_audited": len(records)}
    return rep


def cluster_costs(dist: np.ndarray, labels: Sequence[int]) -> list[float]:
    lab = np.asarray(labels)
    out = []
    for j in sorted(set(lab.tolist())):
        m = np.flatnonzero(lab == j)
        out.append(float(dist[np.ix_(m, m)].sum(axis=0).min()))
    return out


def audit_feasibility(events: Sequence[dict], exact_opt: float) -> str:
    """'pass'/'fail' when exact_opt <= B, else 'n/a' (premise fails)."""
    head = events[0]
    if exact_opt > head["budget"] + TOL:
        return "n/a"
    used = max((e["label"] for e in events if e["kind"] == "label"), default=0)
    return "pass" if used <= head["k"] else "fail"


# ------------------------------------------------------------ static checks


def check_separated_set_bound(space: MetricSpace, S: Sequence[int], k: int, budget: float, b: float, cap: int = 10**6):
    """Exhaustively look for k+1 points of S that are pairwise b-separated
    under the weights of S. Returns ('n/a'|'pass'|'fail', witness)."""
    S = sorted(S)
    if not b > 8:
        return "n/a", None
    reps, mult, _, _ = dedup(space, S)
    opt, _ = exact_on_matrix(space.pairwise(reps), mult, k, cap)
    if opt > budget + TOL:
        return "n/a", None
    dist = space.pairwise(S)
    lim = 2.0 * budget + TOL
    w = (np.cumsum(np.sort(dist, axis=1), axis=1) <= lim).sum(axis=1)
    sep = np.minimum(w[:, None], w[None, :]) * dist >= b * budget - TOL
    m = len(S)

    def grow(chosen, start):
        if len(chosen) == k + 1:
            return chosen
        for v in range(start, m):
            if all(sep[v, u] for u in chosen):
                found = grow(chosen + [v], v + 1)
                if found:
                    return found
        return None

    hit = grow([], 0)
    if hit:
        return "fail", [S[v] for v in hit]
    return "pass", None


def check_weighted_triangle(space: MetricSpace, x: int, y: int, p: int, w, b: float, bx: float, by: float, budget: float) -> str:
    """'n/a' unless the premises hold; then 'pass' iff b < bx + by."""
    wx, wy, wp = w[x], w[y], w[p]
    dxy, dxp, dyp = space.distance(x, y), space.distance(x, p), space.distance(y, p)
    premise = (
        wx <= wp
        and min(wx, wy) * dxy >= b * budget
        and min(wx, wp) * dxp < bx * budget
        and min(wy, wp) * dyp < by * budget
    )
    if not premise:
        return "n/a"
    return "pass" if b < bx + by else "fail"


def load_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
