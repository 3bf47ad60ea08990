from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utils.diagnostics import ParseError
from core.parser import parse_program, parse_term
from core.printer import print_program, print_term, print_type
from core.subst import alpha_eq
from core.syntax import (
    App, EApp, EffectSet, Fix, ForallEff, IfaceT, KLam, LApp, Let, Numeral,
    Program, RegionNew, Throw, UNIT_VAL, UnitVal, Unroll, Up, Var, emit,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CORE_FILES = sorted(p.relative_to(CORPUS).as_posix() for p in CORPUS.rglob("*.olaf"))


def test_trivial_program():
    program = parse_program("region L0 { unit }")
    assert program == Program((), 0, UnitVal())


def test_interface_declarations():
    program = parse_program("interface Ask['a] = forall 'x. Unit ! {'a, 'x};\nregion L0 { unit }")
    (decl,) = program.interfaces
    assert decl.name == "Ask" and decl.params == ("'a",)
    assert isinstance(decl.sig, ForallEff)


def test_application_chains():
    term = parse_term("raise (unroll h)['e][{L0, ^p}][^q](x)")
    assert isinstance(term, Up)
    app = term.term
    assert isinstance(app, App) and app.arg == Var("x")
    assert isinstance(app.fn, LApp) and app.fn.life == "^q"
    assert isinstance(app.fn.term, EApp) and app.fn.term.eff == EffectSet.of(0, "^p")
    assert app.fn.term.term.eff == EffectSet.of("'e")


def test_interfaces_may_name_a_home_lifetime():
    text = "interface Ask @ ^h = op(Unit ! {^h}) @ L0 ! {};\nregion L0 { unit }"
    program = parse_program(text)
    assert program.interfaces[0].home == "^h"
    assert alpha_eq(parse_program(print_program(program)), program)


def test_handler_types_carry_arguments():
    term = parse_term("fix h : Ask[{L0}] @ L1 { \\k => throw(k, unit) }")
    assert isinstance(term, Fix)
    assert (term.iface, term.args, term.life) == ("Ask", (EffectSet.of(0),), 1)


@pytest.mark.parametrize("text", [
    "region L0 { reset L1 { unit } }",
    "region L0 { cont <Unit ! {}> { unit } }",
])
def test_runtime_forms_are_rejected(text):
    with pytest.raises(ParseError) as err:
        parse_program(text)
    assert err.value.message == "runtime-only form"


def test_errors_carry_positions():
    with pytest.raises(ParseError) as err:
        parse_program("region L0 {\n  let = unit in unit\n}")
    assert err.value.span is not None and err.value.span[0] == 2
    assert err.value.render().startswith("error[ParseError] at 2:")


def test_negative_numerals_are_rejected():
    with pytest.raises(ParseError):
        parse_program("region L0 { nat -1 @ L0 }")


@pytest.mark.parametrize("name", CORE_FILES)
def test_corpus_round_trips_through_the_printer(name):
    program = parse_program((CORPUS / name).read_text())
    assert alpha_eq(parse_program(print_program(program)), program)


# ---------- generated terms ----------

names = st.sampled_from(["x", "y", "k", "h"])
lifetimes = st.one_of(st.integers(min_value=0, max_value=4), st.sampled_from(["^p", "^q"]))
effect_sets = st.lists(st.one_of(lifetimes, st.sampled_from(["'a", "'b"])), max_size=3).map(
    lambda atoms: EffectSet(tuple(atoms)))

leaves = st.one_of(
    names.map(Var),
    st.just(UNIT_VAL),
    st.builds(Numeral, st.integers(min_value=0, max_value=9), st.integers(min_value=0, max_value=3)),
    st.builds(emit, st.sampled_from(["ping", "pong", "7"]), st.integers(min_value=0, max_value=3)),
)


def _raise_chain(base, args):
    term = Unroll(Var(base))
    for arg in args:
        if isinstance(arg, EffectSet):
            term = EApp(term, arg)
        elif isinstance(arg, (str, int)):
            term = LApp(term, arg)
        else:
            term = App(term, arg)
    return Up(term)


def _extend(inner):
    return st.one_of(
        st.builds(Let, names, inner, inner),
        st.builds(RegionNew, st.integers(min_value=1, max_value=5), inner),
        st.builds(lambda k, t: Throw(Var(k), t), names, inner),
        st.builds(_raise_chain, names, st.lists(st.one_of(effect_sets, lifetimes, names.map(Var)), max_size=3)),
        st.builds(lambda s, k, life, t: Fix(s, KLam(k, t), life, "Ask", (EffectSet.of("'a"),)),
                  names, names, st.integers(min_value=0, max_value=3), inner),
    )


terms = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(terms)
def test_generated_terms_round_trip(term):
    assert alpha_eq(parse_term(print_term(term)), term)


def test_handler_interface_types_print_their_arguments():
    ty = IfaceT("Pong", (EffectSet.of(0), EffectSet.of("^r")), 2)
    assert print_type(ty) == "Pong[{L0}, {^r}] @ L2"
