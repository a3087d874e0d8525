"""Command-line harness: run, audit, adversary, sweep, generate."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .audit import audit_trace, load_trace
from .engine import BudgetViolation, OnlineEngine, write_trace
from .greedy import run_greedy
from .instances import (
    FAMILIES,
    AdversaryConfig,
    GeneratorSpec,
    certify,
    engine_labeler,
    generate,
    greedy_labeler,
    run_lower_bound_adversary,
)
from .metric import Stream, read_stream, write_stream
from .offline import EXACT_CAP, LOCAL_SEARCH_FACTOR

EXIT_OK, EXIT_AUDIT, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

COLUMNS = [
    "family",
    "params",
    "seed",
    "algorithm",
    "n",
    "k",
    "budget",
    "budget_source",
    "labels_used",
    "phases",
    *[f"add_{c}" for c in range(1, 5)],
    *[f"exchange_{c}" for c in range(1, 6)],
    "final_cost",
    "ratio",
    "status",
]


class UsageError(Exception):
    pass


def resolve_budget(spec: str | None, stream: Stream, k: int) -> tuple[float, str]:
    """A number, 'auto:exact', or 'auto:approx5' (also written 'auto:approx×5')."""
    if spec is None:
        if "budget" in stream.meta:
            return float(stream.meta["budget"]), "generator"
        raise UsageError("--budget is required for this input")
    s = spec.strip().lower().replace("×", "x").replace("*", "x")
    if s == "auto:exact":
        opt, how = certify(stream.space, k, cap=10**9)
        if how != "exact":
            raise UsageError("auto:exact is infeasible at this size; use auto:approx5")
        return max(opt, 1e-6), "auto:exact"
    if s in ("auto:approx5", "auto:approxx5"):
        opt, _ = certify(stream.space, k, cap=0)
        return max(LOCAL_SEARCH_FACTOR * opt, 1e-6), "auto:approx5"
    try:
        b = float(spec)
    except ValueError:
        raise UsageError(f"bad --budget {spec!r}") from None
    if not b > 0:
        raise UsageError("--budget must be positive")
    return b, "given"


def _family_params(args) -> dict:
    if args.family == "fig1":
        return {"alpha": args.alpha}
    if args.family == "planted-random":
        return {"clusters": args.clusters or args.k, "spread": args.spread, "n": args.n, "dim": args.dim}
    if args.family == "beta-halving":
        return {"m": args.n, "k": args.k or 3}
    return {}


def load_input(args) -> Stream:
    if args.input:
        path = Path(args.input)
        if not path.exists():
            raise UsageError(f"no such input {path}")
        try:
            return read_stream(path, metric=args.metric, validate=not args.no_validate)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.family:
        if args.family == "lowerbound":
            raise UsageError("the lowerbound family is adaptive; use the adversary command")
        return generate(GeneratorSpec(args.family, _family_params(args), args.seed))
    raise UsageError("give --input or --family")


def summary_row(stream: Stream, algorithm: str, summary: dict, budget_source: str, seed, status: str) -> dict:
    row = {c: "" for c in COLUMNS}
    row.update(
        family=stream.meta.get("family", "input"),
        params=json.dumps(stream.meta.get("params", {}), sort_keys=True),
        seed=seed,
        algorithm=algorithm,
        n=summary.get("n", len(stream)),
        k=summary["k"],
        budget=repr(float(summary["budget"])),
        budget_source=budget_source,
        labels_used=summary.get("labels_used", ""),
        phases=summary.get("phases", ""),
        final_cost=repr(float(summary["final_cost"])) if "final_cost" in summary else "",
        ratio=repr(float(summary["ratio"])) if "ratio" in summary else "",
        status=status,
    )
    for c, v in enumerate(summary.get("add_counts", []), 1):
        row[f"add_{c}"] = v
    for c, v in enumerate(summary.get("exchange_counts", []), 1):
        row[f"exchange_{c}"] = v
    return row


def write_rows(rows, out) -> None:
    w = csv.DictWriter(out, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def execute(stream: Stream, k: int, budget: float, *, algorithm="engine", solver="auto", trace_out=None, audit=False):
    """Run one algorithm on a stream; returns (summary, status, report)."""
    if algorithm == "greedy":
        g = run_greedy(stream.space, k, budget)
        return g.summary(), "infeasible" if g.infeasible else "ok", None
    eng = OnlineEngine(stream.space, k, budget, solver=solver)
    status = "ok"
    try:
        eng.run()
        summary = eng.finalize()
    except BudgetViolation as exc:
        status = "budget_violation"
        summary = {"n": eng.index.size, "k": k, "budget": budget, "labels_used": eng.state.t, "error": str(exc)}
    if trace_out:
        write_trace(trace_out, eng.events)
    report = None
    if audit and status == "ok":
        report = audit_trace(eng.events, stream.space)
        if not report.ok:
            status = "audit_fail"
    return summary, status, report


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    stream = load_input(args)
    if len(stream) == 0:
        raise UsageError("empty input")
    k = args.k or stream.meta.get("k")
    if not k:
        raise UsageError("--k is required for this input")
    budget, src = resolve_budget(args.budget, stream, k)
    summary, status, report = execute(
        stream, k, budget, algorithm=args.algorithm, solver=args.solver, trace_out=args.trace_out, audit=args.audit
    )
    write_rows([summary_row(stream, args.algorithm, summary, src, args.seed, status)], sys.stdout)
    if report is not None and args.report_out:
        Path(args.report_out).write_text(report.to_json())
    if status == "budget_violation":
        print(f"error: {summary['error']}", file=sys.stderr)
        return EXIT_BUDGET
    if status == "audit_fail":
        print(f"audit failed: {', '.join(report.failed())}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_audit(args) -> int:
    events = load_trace(args.trace)
    stream = load_input(args)
    report = audit_trace(events, stream.space, maximality=args.maximality)
    text = report.to_json()
    if args.report_out:
        Path(args.report_out).write_text(text)
    else:
        print(text)
    return EXIT_OK if report.ok else EXIT_AUDIT


def cmd_adversary(args) -> int:
    ks = [args.k] if args.k else list(range(2, 7))
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["k", "target", "budget", "L", "n", "branch", "phase", "cost", "ratio", "bound", "opt"])
    for k in ks:
        cfg = AdversaryConfig(k, args.budget_value, args.adversary_L)
        if args.target == "greedy":
            lab, _ = greedy_labeler(k, cfg.budget, k)
        else:
            lab, _ = engine_labeler(k, cfg.budget, k)
        r = run_lower_bound_adversary(lab, cfg)
        out.writerow(
            [k, args.target, cfg.budget, cfg.L, len(r.labels), r.branch, r.phase, repr(r.cost), repr(r.ratio), (k - 1) / 2, repr(r.opt)]
        )
    return EXIT_OK


def _sweep_row(item: dict) -> list[dict]:
    spec = GeneratorSpec(item["family"], item.get("params", {}), item.get("seed", 0))
    stream = generate(spec)
    k = item.get("k", stream.meta["k"])
    budget, src = resolve_budget(item.get("budget"), stream, k)
    rows = []
    for algorithm in item.get("algorithms", ["engine", "greedy"]):
        summary, status, _ = execute(stream, k, budget, algorithm=algorithm, audit=item.get("audit", False))
        rows.append(summary_row(stream, algorithm, summary, src, spec.seed, status))
    return rows


def cmd_sweep(args) -> int:
    spec = json.loads(Path(args.spec).read_text()) if args.spec else []
    if isinstance(spec, dict):
        spec = spec.get("rows", [])
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_sweep_row, spec))
    else:
        parts = [_sweep_row(item) for item in spec]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        write_rows([r for part in parts for r in part], out)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_generate(args) -> int:
    stream = load_input(args)
    write_stream(args.out, stream)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="consistent-kmedian", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def stream_opts(sp):
        sp.add_argument("--input", help="stream JSONL (matrix metrics read a .csv sidecar)")
        sp.add_argument("--metric", choices=["l1", "l2", "matrix"])
        sp.add_argument("--no-validate", action="store_true", help="skip the triangle check on matrices")
        sp.add_argument("--family", choices=FAMILIES)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--alpha", type=int, default=100)
        sp.add_argument("--n", type=int, default=100)
        sp.add_argument("--clusters", type=int)
        sp.add_argument("--spread", type=float, default=0.5)
        sp.add_argument("--dim", type=int, default=2)
        sp.add_argument("--k", type=int)

    r = sub.add_parser("run", help="run the engine or the greedy baseline on a stream")
    stream_opts(r)
    r.add_argument("--budget", help="number, auto:exact or auto:approx5")
    r.add_argument("--algorithm", choices=["engine", "greedy"], default="engine")
    r.add_argument("--solver", choices=["auto", "exact", "local"], default="auto")
    r.add_argument("--trace-out")
    r.add_argument("--audit", action="store_true")
    r.add_argument("--report-out")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="audit a trace against its stream")
    stream_opts(a)
    a.add_argument("--trace", required=True)
    a.add_argument("--maximality", action="store_true", help="also check no operation was left applicable")
    a.add_argument("--report-out")
    a.set_defaults(func=cmd_audit)

    v = sub.add_parser("adversary", help="run the adaptive lower-bound adversary")
    v.add_argument("--k", type=int, help="single k (default: 2..6)")
    v.add_argument("--budget", dest="budget_value", type=float, default=1.0)
    v.add_argument("--adversary-L", dest="adversary_L", type=float)
    v.add_argument("--target", choices=["engine", "greedy"], default="engine")
    v.set_defaults(func=cmd_adversary)

    s = sub.add_parser("sweep", help="run a JSON list of generator specs, emit CSV")
    s.add_argument("spec", nargs="?")
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("generate", help="write a generated stream to JSONL")
    stream_opts(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
