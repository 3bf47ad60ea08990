import math
import statistics

import pytest
from jinja2 import TemplateNotFound

from utils.config import CORPUS_DIR
from utils.diagnostics import CorpusFailure
from core.dynamics import evaluate
from core.parser import parse_program
from harness.bench import BenchSpec, context_work, load_bench_spec, ratio, render_program, run_bench

SIZES = (100, 1000, 10000)


@pytest.fixture(scope="module")
def shipped_runs():
    """The checked-in ping-pong spec, run once at each size."""
    spec = load_bench_spec(CORPUS_DIR / "bench.json")
    return {n: run_bench(spec.model_copy(update={"iterations": n, "repetitions": 1})) for n in SIZES}


def test_template_renders_the_requested_rounds():
    text = render_program("pingpong", 3)
    assert "nat 3 @ L0" in text
    assert evaluate(parse_program(text)).tokens == ["ping", "pong"] * 3


def test_fixponger_template_renders_the_requested_rounds():
    text = render_program("fixponger", 4)
    assert "nat 4 @ L0" in text
    assert evaluate(parse_program(text)).tokens == ["ping", "pong"] * 4


def test_unknown_template():
    with pytest.raises(TemplateNotFound):
        render_program("nothing", 1)


def test_checked_in_bench_spec(corpus_dir):
    spec = load_bench_spec(corpus_dir / "bench.json")
    assert spec.program == "pingpong"
    assert spec.variant == "callback"
    assert spec.iterations == 10000
    assert spec.tail_fast is False


def test_checked_in_fixponger_spec(corpus_dir):
    spec = load_bench_spec(corpus_dir / "bench_fixponger.json")
    assert spec.program == "fixponger"
    assert spec.iterations == 10000
    assert spec.tail_fast is False


@pytest.mark.parametrize("text", [
    '{"program": "pingpong", "iterations": 0}',
    '{"program": "pingpong", "iterations": 3, "variant": "other"}',
    '{"program": "pingpong", "iterations": 3, "extra": 1}',
    "not json",
])
def test_malformed_bench_specs(tmp_path, text):
    path = tmp_path / "bench.json"
    path.write_text(text)
    with pytest.raises(CorpusFailure):
        load_bench_spec(path)


def test_ratio():
    assert ratio(3, 2) == 1.5
    assert ratio(5, 0) == math.inf
    assert ratio(0, 0) == 1.0


def test_small_bench():
    summary = run_bench(BenchSpec(program="pingpong", iterations=3, repetitions=2))
    assert summary["tokenTracesEqual"] is True
    assert summary["callbackTypechecks"] is True
    assert summary["direct"]["tokens"] == summary["callback"]["tokens"] == 6
    assert summary["direct"]["outcome"] == summary["callback"]["outcome"] == "Finished"
    assert summary["counterRatio"] > 1
    assert "_trace" not in summary["direct"]


def test_fixponger_bench():
    summary = run_bench(BenchSpec(program="fixponger", iterations=50, repetitions=1))
    assert summary["tokenTracesEqual"] is True
    assert summary["callbackTypechecks"] is True
    assert summary["direct"]["tokens"] == 100
    assert summary["counterRatio"] > 1


def test_bench_with_the_shortcut():
    summary = run_bench(BenchSpec(program="pingpong", iterations=2, repetitions=1, tailFast=True))
    assert summary["tailFast"] is True
    assert summary["direct"]["counters"]["contextReifications"] == 0
    assert summary["callback"]["counters"]["contextReifications"] == 0
    # forcing still searches the whole stack for the program's delimiter
    assert summary["callback"]["counters"]["delimiterCrossings"] > summary["direct"]["counters"]["delimiterCrossings"]
    assert summary["counterRatio"] > 1


def test_shipped_spec_doubles_the_context_work(shipped_runs):
    summary = shipped_runs[10000]
    assert summary["tailFast"] is False
    assert summary["callbackTypechecks"] is True
    assert summary["tokenTracesEqual"] is True
    assert summary["direct"]["tokens"] == 20000
    assert context_work(summary["callback"]["counters"]) > context_work(summary["direct"]["counters"])
    assert summary["counterRatio"] >= 2
    assert summary["timeRatio"] > 0


@pytest.mark.parametrize("variant", ["direct", "callback"])
@pytest.mark.parametrize("counter", ["steps", "freshLabels", "contextReifications"])
def test_counters_grow_linearly(shipped_runs, variant, counter):
    ys = [shipped_runs[n][variant]["counters"][counter] for n in SIZES]
    slope, intercept = statistics.linear_regression(SIZES, ys)
    for n, y in zip(SIZES, ys):
        assert abs(y - (slope * n + intercept)) <= 0.05 * y


@pytest.mark.parametrize("variant", ["direct", "callback"])
def test_crossings_follow_the_stack_depth(shipped_runs, variant):
    # every round runs inside the resumption of the last one, so the stack
    # deepens linearly and the searches from the program label grow with it
    c = [shipped_runs[n][variant]["counters"]["delimiterCrossings"] for n in SIZES]
    assert c[1] > 50 * c[0]
    assert c[2] > 50 * c[1]
