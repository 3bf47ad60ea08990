import pytest

from utils.diagnostics import Untranslatable
from core.dynamics import evaluate
from core.parser import parse_program
from core.printer import print_program
from core.statics import check_program
from core.subst import alpha_eq
from core.syntax import EMPTY, EffectSet, OpT, Result, UNIT
from harness.bench import context_work
from harness.callback import callback_sig, callback_translate, translatable_interfaces


def _leaf(sig):
    while not isinstance(sig, Result):
        sig = sig.body
    return sig


def test_pingpong_targets(load_core):
    assert translatable_interfaces(load_core("pingpong.olaf")) == {"Ping", "Pong", "Pinger", "Ponger", "Out"}


def test_results_become_thunks_at_the_program_label():
    sig = Result(UNIT, EffectSet.of("'a", 0))
    assert callback_sig(sig, "^h", 0) == Result(OpT(Result(UNIT, EffectSet.of(0, "'a", "^h")), 0), EMPTY)


def test_translated_interfaces(load_core):
    program = callback_translate(load_core("pingpong.olaf"))
    table = program.table()
    assert table["Ping"].home == "^h"
    leaf = _leaf(table["Ping"].sig)
    assert leaf.eff == EMPTY
    assert isinstance(leaf.ty, OpT)
    assert leaf.ty.life == program.label
    # the thunk may raise to the handler being defined
    assert "^h" in leaf.ty.sig.eff
    assert table["Out"].sig == Result(UNIT, EMPTY)
    assert "Out_1" in table


@pytest.mark.parametrize("name", ["pingpong", "fixponger", "tunneling", "yield"])
def test_translation_typechecks_at_the_source_type(load_core, name):
    source = load_core(f"{name}.olaf")
    assert check_program(callback_translate(source)) == check_program(source)


def test_translation_reads_back(load_core):
    program = callback_translate(load_core("pingpong.olaf"))
    again = parse_program(print_program(program))
    assert alpha_eq(again, program)
    assert check_program(again).render() == "Unit ! {}"


def test_call_sites_force_the_thunk(load_core):
    text = print_program(callback_translate(load_core("tunneling.olaf")))
    assert "raise raise unroll outer" in text
    assert "raise raise unroll task" in text


@pytest.mark.parametrize("name", ["pingpong", "fixponger", "tunneling", "yield"])
def test_callback_variant_keeps_the_trace(load_core, expected_tokens, name):
    callback = evaluate(callback_translate(load_core(f"{name}.olaf")))
    assert callback.outcome_name == "Finished"
    assert callback.tokens == expected_tokens(f"{name}.expected")


def test_callback_variant_keeps_the_program_type_at_every_step(load_core):
    result = evaluate(callback_translate(load_core("yield.olaf")), check_preservation=True)
    assert result.violations == []
    assert result.preservation_checks == result.counters.steps


def test_callback_variant_does_more_context_work(load_core):
    program = load_core("pingpong.olaf")
    direct = evaluate(program)
    callback = evaluate(callback_translate(program))
    assert context_work(callback.counters.to_dict()) > context_work(direct.counters.to_dict())
    # forcing a thunk opens no region
    assert callback.counters.fresh_labels == direct.counters.fresh_labels
    # one extra capture per forced thunk: 51 Pinger calls, 50 each of Ping,
    # Ponger and Pong, and 100 emits
    extra = callback.counters.context_reifications - direct.counters.context_reifications
    assert extra == 51 + 3 * 50 + 100


def test_forced_thunks_skip_capture_under_the_shortcut(load_core):
    program = callback_translate(load_core("pingpong.olaf"))
    fast = evaluate(program, tail_fast=True)
    assert fast.counters.context_reifications == 0
    assert fast.tokens == ["ping", "pong"] * 50


def test_only_raises_of_translated_objects_are_forced(load_core):
    program = callback_translate(load_core("pingpong.olaf"))
    text = print_program(program)
    assert "raise raise (unroll pinger)" in text
    assert "raise (unroll n)" in text
    assert "raise raise (unroll n)" not in text


@pytest.mark.parametrize("name", ["async", "abortive", "trivial"])
def test_programs_outside_the_fragment(load_core, name):
    with pytest.raises(Untranslatable):
        callback_translate(load_core(f"{name}.olaf"))
