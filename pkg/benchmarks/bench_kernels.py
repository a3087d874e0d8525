"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from consistent_kmedian import _fallback
from consistent_kmedian.engine import OnlineEngine
from consistent_kmedian.instances import gen_planted

try:
    from consistent_kmedian import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_heaps(mod, dist, budget):
    def go():
        h = mod.SiteHeaps(2 * budget, 1e-9)
        counts = np.ones(dist.shape[0], dtype=np.int64)
        for s in range(dist.shape[0]):
            if s:
                h.arrive(np.ascontiguousarray(dist[s, :s]))
            h.new_site(np.ascontiguousarray(dist[s, : s + 1]), counts[: s + 1])
        return h.weights()

    return go


def bench_exact(mod, dist, mult, k):
    return lambda: mod.exact_kmedian(dist, mult, k)


def bench_pairs(mod, dist, w, thr):
    cand = np.arange(dist.shape[0], dtype=np.intp)
    return lambda: mod.first_separated_pair(dist, w, cand, thr)


def bench_engine(pure, space, k, budget):
    import consistent_kmedian.engine as eng_mod
    import consistent_kmedian.offline as off_mod
    import consistent_kmedian.weights as w_mod

    mod = _fallback if pure else _kernels
    saved = (w_mod.SiteHeaps, eng_mod.first_separated_pair, off_mod.exact_kmedian_kernel)
    w_mod.SiteHeaps, eng_mod.first_separated_pair, off_mod.exact_kmedian_kernel = (
        mod.SiteHeaps,
        mod.first_separated_pair,
        mod.exact_kmedian,
    )

    def go():
        e = OnlineEngine(space, k, budget)
        e.run()
        return e.state.labels

    try:
        return best_of(go, 1)
    finally:
        w_mod.SiteHeaps, eng_mod.first_separated_pair, off_mod.exact_kmedian_kernel = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; only the fallback is available")
        return
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((400, 2))
    diff = pts[:, None] - pts[None]
    dist = np.ascontiguousarray(np.sqrt((diff**2).sum(-1)))
    small = np.ascontiguousarray(dist[:60, :60])
    mult = np.ones(60)
    w = rng.integers(1, 50, 400).astype(np.int64)
    stream = gen_planted(4, 0.4, 300, seed=1)
    cases = [
        ("site heaps, 400 sites", lambda m: bench_heaps(m, dist, 1.0)),
        ("exact 3-median, 60 sites", lambda m: bench_exact(m, small, mult, 3)),
        ("separated-pair scan, 400", lambda m: bench_pairs(m, dist, w, 1e9)),
    ]
    print(f"{'kernel':32s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}  same")
    for name, make in cases:
        tc, oc = best_of(make(_kernels), args.repeat)
        tp, op = best_of(make(_fallback), args.repeat)
        same = np.array_equal(np.asarray(oc, dtype=object), np.asarray(op, dtype=object))
        print(f"{name:32s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}  {same}")
    tc, lc = bench_engine(False, stream.space, 4, stream.meta["budget"])
    tp, lp = bench_engine(True, stream.space, 4, stream.meta["budget"])
    print(f"{'engine run, planted n=300':32s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}  {lc == lp}")


if __name__ == "__main__":
    main()
