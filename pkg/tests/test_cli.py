import json

from database.db import SessionLocal
from database.models import BenchRun, CorpusRun
from core.parser import parse_program
from main import EXIT_FUEL, EXIT_OK, EXIT_PARSE, EXIT_STUCK, EXIT_TYPE, run_cli


def _run(capsys, *argv):
    code = run_cli([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_typecheck(capsys, corpus_dir):
    code, out, _ = _run(capsys, "typecheck", corpus_dir / "pingpong.olaf")
    assert code == EXIT_OK
    assert out.strip() == "Unit ! {}"


def test_type_errors_exit_one(capsys, corpus_dir):
    code, _, err = _run(capsys, "typecheck", corpus_dir / "negative/escape.olaf")
    assert code == EXIT_TYPE
    assert "error[EffectEscape]" in err


def test_json_diagnostics(capsys, corpus_dir):
    code, _, err = _run(capsys, "typecheck", "--json", corpus_dir / "negative/escape.olaf")
    assert code == EXIT_TYPE
    diagnostic = json.loads(err)
    assert diagnostic["code"] == "EffectEscape"
    assert diagnostic["rule"] == "t-down side condition"


def test_parse_errors_exit_two(capsys, tmp_path):
    path = tmp_path / "broken.olaf"
    path.write_text("region L0 {\n  let x = in unit\n}")
    code, _, err = _run(capsys, "run", path)
    assert code == EXIT_PARSE
    assert "error[ParseError]" in err


def test_missing_files_exit_two(capsys, tmp_path):
    code, _, _ = _run(capsys, "typecheck", tmp_path / "absent.olaf")
    assert code == EXIT_PARSE


def test_run_prints_tokens(capsys, corpus_dir):
    code, out, _ = _run(capsys, "run", corpus_dir / "abortive.olaf")
    assert code == EXIT_OK
    assert out.split() == ["aborted", "after"]


def test_run_surface_files(capsys, corpus_dir):
    code, out, _ = _run(capsys, "run", "--tail-fast", corpus_dir / "tunneling.bdl")
    assert code == EXIT_OK
    assert out.split() == ["outer"]


def test_run_surface_pingpong_within_a_fuel_budget(capsys, corpus_dir):
    code, out, _ = _run(capsys, "run", corpus_dir / "pingpong.bdl", "--fuel", "100000")
    assert code == EXIT_OK
    assert out.split() == ["ping", "pong"] * 50


def test_fuel_exhaustion_exits_four(capsys, corpus_dir):
    code, _, err = _run(capsys, "run", "--fuel", "10", corpus_dir / "pingpong.olaf")
    assert code == EXIT_FUEL
    assert "fuel exhausted after 10 steps" in err


def test_trace_writes_json_lines(capsys, corpus_dir, tmp_path):
    out_path = tmp_path / "trace.jsonl"
    code, _, _ = _run(capsys, "trace", "--trace-out", out_path, corpus_dir / "trivial.olaf")
    assert code == EXIT_OK
    lines = [json.loads(line) for line in out_path.read_text().splitlines()]
    assert [line.get("rule") for line in lines[:2]] == ["down", "downval"]
    assert lines[-1]["outcome"] == "Finished"


def test_desugar_prints_a_core_program(capsys, corpus_dir):
    code, out, _ = _run(capsys, "desugar", corpus_dir / "pingpong.bdl")
    assert code == EXIT_OK
    names = [decl.name for decl in parse_program(out).interfaces]
    assert names == ["Ping", "Pong", "Pinger", "Ponger"]


def test_corpus_command(capsys, corpus_dir, tmp_path):
    report = tmp_path / "report.md"
    code, out, _ = _run(capsys, "corpus", corpus_dir / "manifest.json", "--only", "trivial",
                        "--only", "escape", "--report", report, "--record")
    assert code == EXIT_OK
    assert "2/2 entries passed" in out
    assert "| escape | pass |" in report.read_text()
    db = SessionLocal()
    try:
        assert db.query(CorpusRun).filter(CorpusRun.entry_id == "escape").count() >= 1
    finally:
        db.close()


def test_failing_corpus_exits_three(capsys, corpus_dir, tmp_path):
    (tmp_path / "wrong.expected").write_text("nope\n")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps([{
        "id": "wrong",
        "core": str(corpus_dir / "trivial.olaf"),
        "expected": {"outcome": "Finished", "tokens": "wrong.expected"},
        "provenance": "TRIVIAL",
    }]))
    code, out, _ = _run(capsys, "corpus", manifest)
    assert code == EXIT_STUCK
    assert "FAIL wrong" in out


def test_bench_command(capsys, tmp_path):
    spec = tmp_path / "bench.json"
    spec.write_text(json.dumps({"program": "pingpong", "iterations": 2, "repetitions": 1}))
    code, out, _ = _run(capsys, "bench", spec, "--record")
    assert code == EXIT_OK
    summary = json.loads(out)
    assert summary["tokenTracesEqual"] is True
    assert set(summary) >= {"direct", "callback", "counterRatio", "timeRatio"}
    db = SessionLocal()
    try:
        variants = {row.variant for row in db.query(BenchRun).filter(BenchRun.iterations == 2)}
    finally:
        db.close()
    assert variants == {"direct", "callback"}
