import csv
import io
import json
import subprocess
import sys

import pytest

from consistent_kmedian.cli import COLUMNS, EXIT_AUDIT, EXIT_BUDGET, EXIT_OK, EXIT_USAGE, main
from consistent_kmedian.instances import gen_fig1
from consistent_kmedian.metric import line_space, write_stream, Stream


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_family_prints_summary_row(capsys):
    assert main(["run", "--family", "fig1", "--alpha", "150"]) == EXIT_OK
    out = rows(capsys.readouterr().out)
    assert len(out) == 1
    r = out[0]
    assert list(r) == COLUMNS
    assert r["labels_used"] == "2" and r["exchange_3"] == "1"
    assert float(r["final_cost"]) == pytest.approx(142.0)
    assert r["budget_source"] == "generator" and r["status"] == "ok"


def test_run_greedy(capsys):
    assert main(["run", "--family", "fig1", "--alpha", "100", "--algorithm", "greedy"]) == EXIT_OK
    r = rows(capsys.readouterr().out)[0]
    assert float(r["final_cost"]) == pytest.approx(100.0)


def test_run_with_audit_and_report(tmp_path, capsys):
    trace, report = tmp_path / "t.jsonl", tmp_path / "r.json"
    code = main(["run", "--family", "label-conflict", "--trace-out", str(trace), "--audit", "--report-out", str(report)])
    assert code == EXIT_OK
    assert json.loads(report.read_text())["ok"] is True
    capsys.readouterr()
    stream = tmp_path / "s.jsonl"
    assert main(["generate", "--family", "label-conflict", "--out", str(stream)]) == EXIT_OK
    assert main(["audit", "--trace", str(trace), "--input", str(stream), "--maximality"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["ok"] is True


def test_audit_failure_exit(tmp_path, capsys):
    trace, stream = tmp_path / "t.jsonl", tmp_path / "s.jsonl"
    main(["run", "--family", "fig1", "--alpha", "150", "--trace-out", str(trace)])
    main(["generate", "--family", "fig1", "--alpha", "150", "--out", str(stream)])
    lines = trace.read_text().splitlines()
    evs = [json.loads(x) for x in lines]
    for e in evs:
        if e["kind"] == "label" and e["i"] == 300:
            e["label"] = 1 if e["label"] == 2 else 2
    trace.write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in evs))
    capsys.readouterr()
    assert main(["audit", "--trace", str(trace), "--input", str(stream)]) == EXIT_AUDIT
    assert "labels" in json.loads(capsys.readouterr().out)["failed"]


def test_traces_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        main(["run", "--family", "planted-random", "--k", "3", "--n", "80", "--seed", "7", "--trace-out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_budget_violation_exit(tmp_path, capsys):
    path = tmp_path / "s.jsonl"
    write_stream(path, Stream(line_space([0.0, 1000.0, 2000.0, 3000.0, 4000.0])))
    code = main(["run", "--input", str(path), "--k", "2", "--budget", "0.001"])
    assert code == EXIT_BUDGET
    captured = capsys.readouterr()
    assert rows(captured.out)[0]["status"] == "budget_violation"
    assert "error" in captured.err


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["run", "--input", "/nonexistent.jsonl", "--k", "2", "--budget", "1"],
        ["run", "--family", "fig1", "--budget", "-3"],
        ["run", "--family", "fig1", "--budget", "lots"],
        ["run", "--family", "lowerbound"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_empty_input_is_usage_error(tmp_path, capsys):
    path = tmp_path / "e.jsonl"
    path.write_text("")
    assert main(["run", "--input", str(path), "--k", "2", "--budget", "1"]) == EXIT_USAGE


def test_missing_k_for_plain_input(tmp_path, capsys):
    path = tmp_path / "s.jsonl"
    write_stream(path, Stream(line_space([0.0, 1.0])))
    assert main(["run", "--input", str(path), "--budget", "1"]) == EXIT_USAGE


def test_auto_budgets(tmp_path, capsys):
    path = tmp_path / "s.jsonl"
    write_stream(path, Stream(line_space([0.0, 1.0, 10.0, 11.0])))
    assert main(["run", "--input", str(path), "--k", "2", "--budget", "auto:exact"]) == EXIT_OK
    r = rows(capsys.readouterr().out)[0]
    assert float(r["budget"]) == 2.0 and r["budget_source"] == "auto:exact"
    assert main(["run", "--input", str(path), "--k", "2", "--budget", "auto:approx×5"]) == EXIT_OK
    r = rows(capsys.readouterr().out)[0]
    assert float(r["budget"]) == pytest.approx(10.0) and r["budget_source"] == "auto:approx5"


def test_adversary_command(capsys):
    assert main(["adversary", "--k", "3"]) == EXIT_OK
    out = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(out) == 1
    assert float(out[0]["ratio"]) >= float(out[0]["bound"]) == 1.0


def test_sweep(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps([{"family": "fig1", "params": {"alpha": 10}}, {"family": "beta-halving", "params": {"m": 10}}]))
    out = tmp_path / "o.csv"
    assert main(["sweep", str(spec), "--out", str(out)]) == EXIT_OK
    r = rows(out.read_text())
    assert [x["algorithm"] for x in r] == ["engine", "greedy", "engine", "greedy"]
    assert r[1]["final_cost"] == "10.0"


def test_sweep_empty_prints_header_only(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text("[]")
    assert main(["sweep", str(spec)]) == EXIT_OK
    assert capsys.readouterr().out == ",".join(COLUMNS) + "\n"


def test_module_entry_point(tmp_path):
    path = tmp_path / "s.jsonl"
    write_stream(path, gen_fig1(3))
    proc = subprocess.run(
        [sys.executable, "-m", "consistent_kmedian.cli", "run", "--input", str(path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("family,")
