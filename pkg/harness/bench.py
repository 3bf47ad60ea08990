"""Direct versus callback benchmark over a templated program."""
import logging
import math
import statistics
import time
from pathlib import Path
from typing import Literal

from jinja2 import Environment, FileSystemLoader, StrictUndefined
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from utils.config import BENCH_REPETITIONS, TEMPLATES_DIR
from utils.diagnostics import CorpusFailure, OlafTypeError
from core.dynamics import DEFAULT_FUEL, evaluate
from core.parser import parse_program
from core.statics import check_program
from harness.callback import callback_translate

log = logging.getLogger(__name__)

VARIANTS = ("direct", "callback")


class BenchSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    program: str
    variant: Literal["direct", "callback"] = "callback"
    iterations: int = Field(gt=0)
    repetitions: int = Field(default=BENCH_REPETITIONS, gt=0)
    tail_fast: bool = Field(default=False, alias="tailFast")


def load_bench_spec(path) -> BenchSpec:
    path = Path(path)
    try:
        return BenchSpec.model_validate_json(path.read_text())
    except OSError as exc:
        raise CorpusFailure(f"cannot read bench spec {path}", detail=str(exc)) from exc
    except ValidationError as exc:
        raise CorpusFailure(f"bench spec {path} is malformed", detail=str(exc)) from exc


def render_program(name: str, rounds: int, template_dir=TEMPLATES_DIR) -> str:
    env = Environment(loader=FileSystemLoader(str(template_dir)), undefined=StrictUndefined,
                      keep_trailing_newline=True)
    return env.get_template(f"{name}.olaf.j2").render(rounds=rounds)


def context_work(counters: dict) -> int:
    return counters["contextReifications"] + counters["delimiterCrossings"]


def ratio(numerator: float, denominator: float) -> float:
    if denominator == 0:
        return math.inf if numerator else 1.0
    return numerator / denominator


def measure(program, variant: str, repetitions: int, fuel: int, tail_fast: bool) -> dict:
    """Run ``program`` ``repetitions`` times; counters must not vary between runs."""
    times = []
    first = None
    for i in range(repetitions):
        start = time.perf_counter()
        run = evaluate(program, fuel=fuel, tail_fast=tail_fast)
        elapsed = (time.perf_counter() - start) * 1000.0
        times.append(elapsed)
        log.info("bench %s repetition %d: %.1f ms", variant, i + 1, elapsed)
        if first is None:
            first = run
        elif run.counters.to_dict() != first.counters.to_dict() or run.tokens != first.tokens:
            raise CorpusFailure(f"{variant} run {i + 1} differs from the first run")
    return {
        "variant": variant,
        "outcome": first.outcome_name,
        "tokens": len(first.tokens),
        "counters": first.counters.to_dict(),
        "medianMs": statistics.median(times),
        "minMs": min(times),
        "_trace": first.tokens,
    }


def run_bench(spec: BenchSpec, fuel: int = DEFAULT_FUEL, template_dir=TEMPLATES_DIR) -> dict:
    direct = parse_program(render_program(spec.program, spec.iterations, template_dir))
    check_program(direct)
    callback = callback_translate(direct)
    try:
        check_program(callback)
        callback_typechecks = True
    except OlafTypeError as exc:
        log.info("callback variant does not typecheck: %s", exc.render())
        callback_typechecks = False

    programs = {"direct": direct, "callback": callback}
    results = {v: measure(programs[v], v, spec.repetitions, fuel, spec.tail_fast) for v in VARIANTS}
    same = results["direct"].pop("_trace") == results["callback"].pop("_trace")
    for variant, summary in results.items():
        if summary["outcome"] != "Finished":
            raise CorpusFailure(f"{variant} variant ended {summary['outcome']}")
    if not same:
        raise CorpusFailure("direct and callback variants emit different token traces")

    d, c = results["direct"], results["callback"]
    return {
        "program": spec.program,
        "iterations": spec.iterations,
        "repetitions": spec.repetitions,
        "tailFast": spec.tail_fast,
        "primary": spec.variant,
        "direct": d,
        "callback": c,
        "callbackTypechecks": callback_typechecks,
        "tokenTracesEqual": same,
        "counterRatio": ratio(context_work(c["counters"]), context_work(d["counters"])),
        "timeRatio": ratio(c["medianMs"], d["medianMs"]),
    }
