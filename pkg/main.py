"""olaf command line: typecheck, run, trace, desugar, bench and corpus."""
import argparse
import json
import logging
import sys
from pathlib import Path

from sqlalchemy.exc import SQLAlchemyError

from database import models
from database.db import get_db, init_db
from utils import config
from utils.diagnostics import (
    DesugarError, OlafError, OlafTypeError, ParseError, Untranslatable, render,
)
from core.dynamics import FuelExhausted, Stuck, TraceWriter, evaluate
from core.parser import parse_program
from core.printer import print_program
from core.statics import check_program
from surface.desugar import desugar_source
from harness.bench import load_bench_spec, run_bench
from harness.corpus import render_report, run_corpus

log = logging.getLogger("olaf")

EXIT_OK = 0
EXIT_TYPE = 1
EXIT_PARSE = 2
EXIT_STUCK = 3
EXIT_FUEL = 4


def load_program(path: Path):
    """Core program for a ``.olaf`` file, or the desugaring of a ``.bdl`` file."""
    text = path.read_text()
    if path.suffix == ".bdl":
        return desugar_source(text)
    return parse_program(text)


def exit_code_for(error: OlafError) -> int:
    if isinstance(error, ParseError):
        return EXIT_PARSE
    if isinstance(error, (OlafTypeError, DesugarError, Untranslatable)):
        return EXIT_TYPE
    return EXIT_STUCK


def outcome_code(result) -> int:
    if isinstance(result.outcome, FuelExhausted):
        return EXIT_FUEL
    if isinstance(result.outcome, Stuck) or result.violations:
        return EXIT_STUCK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="olaf", description="Bidirectional algebraic effects, executable.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fuel=True):
        p.add_argument("--json", action="store_true", help="diagnostics as JSON objects")
        if fuel:
            p.add_argument("--fuel", type=int, default=None, help=f"step budget (default {config.FUEL})")
            p.add_argument("--tail-fast", action="store_true", help="run tail resumptions without capturing")
        return p

    common(sub.add_parser("typecheck", help="print the program's type and effects"), fuel=False).add_argument("file", type=Path)
    for name, text in (("run", "run and print the output tokens"), ("trace", "run and write a JSON-lines trace")):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("file", type=Path)
        p.add_argument("--check-preservation", action="store_true", help="re-type every configuration")
        if name == "trace":
            p.add_argument("--trace-out", type=Path, default=None, help="trace file (default stdout)")
    common(sub.add_parser("desugar", help="print the core program for a surface file"), fuel=False).add_argument("file", type=Path)

    p = common(sub.add_parser("bench", help="compare the direct and callback variants"))
    p.add_argument("file", type=Path, help="benchmark spec (JSON)")
    p.add_argument("--record", action="store_true", help="store the results in the run history")

    p = common(sub.add_parser("corpus", help="check every corpus entry"))
    p.add_argument("manifest", type=Path, nargs="?", default=config.CORPUS_DIR / "manifest.json")
    p.add_argument("--check-preservation", action="store_true")
    p.add_argument("--report", type=Path, default=None, help="write a markdown report")
    p.add_argument("--record", action="store_true", help="store the results in the run history")
    p.add_argument("--only", action="append", default=None, metavar="ID")
    return parser


# ---------- commands ----------

def cmd_typecheck(args) -> int:
    print(check_program(load_program(args.file)).render())
    return EXIT_OK


def cmd_desugar(args) -> int:
    print(print_program(load_program(args.file)))
    return EXIT_OK


def cmd_run(args) -> int:
    program = load_program(args.file)
    check_program(program)
    result = evaluate(program, fuel=args.fuel, tail_fast=args.tail_fast,
                      check_preservation=args.check_preservation)
    for token in result.tokens:
        print(token)
    return _finish(result, args)


def cmd_trace(args) -> int:
    program = load_program(args.file)
    check_program(program)
    if args.trace_out is not None:
        with open(args.trace_out, "w") as stream:
            result = evaluate(program, fuel=args.fuel, tail_fast=args.tail_fast,
                              check_preservation=args.check_preservation, trace=TraceWriter(stream))
    else:
        result = evaluate(program, fuel=args.fuel, tail_fast=args.tail_fast,
                          check_preservation=args.check_preservation, trace=TraceWriter(sys.stdout))
    return _finish(result, args)


def _finish(result, args) -> int:
    for violation in result.violations:
        print(f"violation: {violation}", file=sys.stderr)
    if isinstance(result.outcome, Stuck):
        message = f"stuck: {result.outcome.describe()}"
        print(json.dumps({"code": "Stuck", "message": message}) if args.json else message, file=sys.stderr)
    elif isinstance(result.outcome, FuelExhausted):
        message = f"fuel exhausted after {result.outcome.steps} steps"
        print(json.dumps({"code": "FuelExhausted", "message": message}) if args.json else message, file=sys.stderr)
    return outcome_code(result)


def cmd_bench(args) -> int:
    spec = load_bench_spec(args.file)
    if args.tail_fast:
        spec = spec.model_copy(update={"tail_fast": True})
    summary = run_bench(spec, fuel=args.fuel)
    print(json.dumps(summary, indent=2))
    if args.record:
        _record([models.BenchRun.from_summary(spec.program, summary[v], spec.iterations,
                                              spec.tail_fast)
                 for v in ("direct", "callback")])
    return EXIT_OK


def cmd_corpus(args) -> int:
    report = run_corpus(args.manifest, fuel=args.fuel, tail_fast=args.tail_fast,
                        check_preservation=args.check_preservation, only=args.only)
    for r in report.results:
        print(f"{'ok  ' if r.passed else 'FAIL'} {r.id}" + (f": {r.detail}" if not r.passed else ""))
    print(f"{len(report.results) - len(report.failed)}/{len(report.results)} entries passed")
    if args.report is not None:
        args.report.write_text(render_report(report))
    if args.record:
        _record([models.CorpusRun(entry_id=r.id, passed=r.passed, outcome=r.outcome,
                                   steps=r.steps, detail=r.detail)
                 for r in report.results])
    return EXIT_OK if report.passed else EXIT_STUCK


def _record(rows):
    """Persist rows; a failing database never changes the exit code."""
    try:
        init_db()
        sessions = get_db()
        db = next(sessions)
        try:
            db.add_all(rows)
            db.commit()
        finally:
            sessions.close()
    except SQLAlchemyError as exc:
        log.warning("could not record results: %s", exc)


COMMANDS = {
    "typecheck": cmd_typecheck,
    "run": cmd_run,
    "trace": cmd_trace,
    "desugar": cmd_desugar,
    "bench": cmd_bench,
    "corpus": cmd_corpus,
}


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, config.LOG_LEVEL, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    sys.setrecursionlimit(max(sys.getrecursionlimit(), config.RECURSION_LIMIT))
    if getattr(args, "fuel", None) is None:
        args.fuel = config.FUEL
    try:
        return COMMANDS[args.command](args)
    except OlafError as exc:
        print(render(exc, args.json), file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(render(ParseError(f"cannot read {exc.filename}", detail=exc.strerror), args.json), file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(run_cli())
