import io
import json

import pytest

from core.dynamics import (
    Config, FuelExhausted, Finished, Machine, Stepped, Stuck, TraceWriter,
    evaluate, matching_rules, max_label, step, tail_fast_step, tunnels,
)
from core.parser import parse_program
from core.syntax import (
    Cont, EMPTY, KLam, LetK, OpVal, Reset, ResetK, Result, Throw, UNIT, UNIT_VAL, Up, Var,
)

RUNNABLE = ["trivial", "pingpong", "fixponger", "iterator", "yield", "async", "tunneling", "abortive"]
TAIL_RESUMPTIVE = ["trivial", "pingpong", "fixponger", "iterator", "yield", "tunneling"]
SMALL = ["trivial", "iterator", "yield", "async", "tunneling", "abortive"]


def test_trivial_region_takes_down_then_downval():
    result = evaluate(parse_program("region L0 { unit }"))
    assert isinstance(result.outcome, Finished)
    assert result.outcome.value == UNIT_VAL
    assert result.counters.steps == 2
    assert result.rule_counts == {"down": 1, "downval": 1}
    assert result.counters.to_dict() == {
        "steps": 2, "freshLabels": 1, "contextReifications": 0, "delimiterCrossings": 0,
    }


@pytest.mark.parametrize("name", RUNNABLE)
def test_corpus_token_traces(load_core, expected_tokens, name):
    result = evaluate(load_core(f"{name}.olaf"))
    assert result.outcome_name == "Finished"
    assert result.tokens == expected_tokens(f"{name}.expected")


@pytest.mark.parametrize("name", TAIL_RESUMPTIVE)
def test_tail_fast_skips_every_capture(load_core, name):
    program = load_core(f"{name}.olaf")
    slow = evaluate(program)
    fast = evaluate(program, tail_fast=True)
    assert fast.tokens == slow.tokens
    assert fast.counters.context_reifications == 0
    assert fast.counters.steps <= slow.counters.steps


def test_pingpong_captures_on_every_dispatch_without_the_shortcut(load_core):
    result = evaluate(load_core("pingpong.olaf"))
    assert result.counters.context_reifications == result.rule_counts["downup"]
    assert len(result.tokens) == 100


@pytest.mark.parametrize("name", SMALL)
def test_exactly_one_rule_applies_at_every_step(load_core, name):
    for tail_fast in (False, True):
        result = evaluate(load_core(f"{name}.olaf"), tail_fast=tail_fast, audit=True)
        assert result.violations == []


@pytest.mark.parametrize("name", ["trivial", "abortive"])
def test_every_configuration_keeps_the_program_type(load_core, name):
    result = evaluate(load_core(f"{name}.olaf"), check_preservation=True)
    assert result.violations == []
    assert result.preservation_checks == result.counters.steps


def test_runs_are_deterministic(load_core):
    program = load_core("fixponger.olaf")
    first, second = evaluate(program), evaluate(program)
    assert first.tokens == second.tokens
    assert first.counters.to_dict() == second.counters.to_dict()
    assert first.dispatches == second.dispatches


def test_fuel_exhaustion(load_core):
    result = evaluate(load_core("pingpong.olaf"), fuel=10)
    assert result.outcome == FuelExhausted(10)
    assert result.report()["outcome"] == "FuelExhausted"


def test_fuel_equal_to_the_run_length_finishes():
    result = evaluate(parse_program("region L0 { unit }"), fuel=2)
    assert isinstance(result.outcome, Finished)


def test_raise_without_a_delimiter_is_stuck():
    program = parse_program(
        "interface Ask = Unit ! {};\n"
        "region L0 { raise (unroll fix _ : Ask @ L7 { \\k => throw(k, unit) }) }")
    result = evaluate(program)
    assert isinstance(result.outcome, Stuck)
    assert result.outcome.reason == "UnmatchedDelimiter"
    assert "UnmatchedDelimiter" in result.report()["reason"]


def test_unrolling_a_non_object_is_stuck():
    result = evaluate(parse_program("region L0 { raise (unroll unit) }"))
    assert isinstance(result.outcome, Stuck)
    assert result.outcome.reason == "BadRedex"


def test_tunnelled_operations_skip_the_closer_handler(load_core):
    result = evaluate(load_core("tunneling.olaf"))
    assert result.tokens == ["outer"]
    assert result.counters.delimiter_crossings > 0


def test_captured_resumptions_keep_their_delimiter():
    program = parse_program(
        "interface Ask = Unit ! {};\n"
        "region L0 { region L1 { let h = fix _ : Ask @ L1 { \\k => k } in raise (unroll h) } }")
    result = evaluate(program)
    assert isinstance(result.outcome, Finished)
    resumption = result.outcome.value
    assert isinstance(resumption, Cont)
    assert isinstance(resumption.frames[0], ResetK)
    assert resumption.frames[0].label == 3
    assert result.counters.context_reifications == 1


def test_fresh_labels_start_above_the_program():
    result = evaluate(parse_program("region L4 { region L9 { unit } }"))
    assert result.counters.fresh_labels == 2
    assert max_label(parse_program("region L4 { region L9 { unit } }").main) == 9


def test_single_steps():
    config = Config(frozenset(), parse_program("region L0 { unit }").main)
    first = step(config)
    assert isinstance(first, Stepped)
    assert first.rule == "down"
    assert first.config.labels == frozenset({1})
    assert first.config.term == Reset(1, UNIT_VAL)
    second = step(first.config)
    assert second.rule == "downval"
    assert step(second.config) == Finished(UNIT_VAL)


def test_matching_rules_for_a_finished_region():
    assert matching_rules(Reset(1, UNIT_VAL)) == [(0, "downval")]


def test_trace_writes_one_line_per_step_and_a_report():
    out = io.StringIO()
    result = evaluate(parse_program("region L0 { unit }"), trace=TraceWriter(out))
    lines = [json.loads(line) for line in out.getvalue().splitlines()]
    assert [line["rule"] for line in lines[:-1]] == ["down", "downval"]
    assert lines[0]["labelCount"] == 1
    assert lines[0]["counters"]["freshLabels"] == 1
    assert lines[-1] == result.report()
    assert lines[-1]["outcome"] == "Finished"


def test_dispatch_picks_the_innermost_delimiter_for_a_label():
    op = OpVal(KLam("k", Throw(Var("k"), UNIT_VAL)), 5, Result(UNIT, EMPTY), None)
    machine = Machine(Reset(5, Reset(5, Up(op))))
    assert machine.step() == "downup"
    assert machine.stack == [ResetK(5)]
    assert isinstance(machine.focus, Throw)
    assert machine.focus.cont.frames == (ResetK(5),)
    assert machine.counters.delimiter_crossings == 0


def test_tail_fast_step_answers_in_place():
    op = OpVal(KLam("k", Throw(Var("k"), UNIT_VAL)), 5, Result(UNIT, EMPTY), None)
    config = Config(frozenset({5}), Reset(5, Up(op)))
    fast = tail_fast_step(config)
    assert fast.rule == "tailFast"
    assert fast.config.term == Reset(5, UNIT_VAL)
    assert step(config).rule == "downup"


def test_tunnels_past_foreign_delimiters_only():
    assert tunnels(1, ())
    assert tunnels(1, (ResetK(2), LetK("x", UNIT_VAL)))
    assert not tunnels(1, (ResetK(2), ResetK(1)))


def test_crossings_count_the_frames_above_the_delimiter():
    op = OpVal(KLam("k", Throw(Var("k"), UNIT_VAL)), 5, Result(UNIT, EMPTY), None)
    machine = Machine(Reset(5, Reset(6, Reset(7, Up(op)))))
    assert machine.step() == "downup"
    assert machine.counters.delimiter_crossings == 2
    assert machine.step() == "throw"
    assert machine.stack == [ResetK(5), ResetK(6), ResetK(7)]
    # throwing walks no delimiter search
    assert machine.counters.delimiter_crossings == 2


def test_reinstated_delimiters_are_found_again():
    program = parse_program(
        "interface Ask = Unit ! {};\n"
        "region L0 { region L1 {\n"
        "  let a = fix _ : Ask @ L0 { \\k => throw(k, unit) } in\n"
        "  let b = fix _ : Ask @ L1 { \\k => throw(k, unit) } in\n"
        "  let _ = raise (unroll a) in let _ = raise (unroll b) in raise (unroll a) } }")
    result = evaluate(program)
    assert isinstance(result.outcome, Finished)
    assert result.counters.context_reifications == 3
    # inner delimiter and let frame, then the let frame, then the inner delimiter
    assert result.counters.delimiter_crossings == 2 + 1 + 1
