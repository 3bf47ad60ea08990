from hypothesis import given
from hypothesis import strategies as st

from core.parser import parse_term
from core.subst import Substitution, alpha_eq, fresh_name, subst_effect, subst_life, subst_value
from core.syntax import (
    EffectSet, ForallLife, IfaceT, Let, Result, UNIT, UNIT_VAL, Var,
)


def test_effect_variables_flatten_into_sets():
    sub = Substitution({"'a": EffectSet.of(0, "^p")})
    assert sub.effects(EffectSet.of("'a", "'b")) == EffectSet.of(0, "^p", "'b")
    assert sub.effects(EffectSet.of("'b")) == EffectSet.of("'b")


def test_effect_substitution_reaches_interface_arguments():
    ty = IfaceT("Ask", (EffectSet.of("'a"),), "^q")
    assert subst_effect(ty, "'a", EffectSet.of(0)) == IfaceT("Ask", (EffectSet.of(0),), "^q")


def test_lifetime_substitution_avoids_capture():
    sig = ForallLife("^p", Result(UNIT, EffectSet.of("^p", "^q")))
    out = subst_life(sig, "^q", "^p")
    assert out.var != "^p"
    assert alpha_eq(out, ForallLife("^z", Result(UNIT, EffectSet.of("^z", "^p"))))


def test_bound_term_variables_are_untouched():
    term = Let("x", Var("y"), Var("x"))
    assert subst_value(term, "x", UNIT_VAL) == term
    assert subst_value(term, "y", UNIT_VAL) == Let("x", UNIT_VAL, Var("x"))


def test_region_labels_are_renamed_by_the_machine_substitution():
    term = parse_term("region L1 { emit a @ L1 }").body
    renamed = subst_life(term, 1, 7)
    assert 7 in renamed.free and 1 not in renamed.free


def test_fresh_names_keep_their_sort():
    assert fresh_name("'a", {"'a"}).startswith("'")
    assert fresh_name("^p", {"^p", "^p_1"}) == "^p_2"
    assert fresh_name(3, {1, 5}) == 6


def test_alpha_equivalence_ignores_bound_names_only():
    a = parse_term("fix s : Out @ L0 { \\k => throw(k, unit) }")
    b = parse_term("fix t : Out @ L0 { \\j => throw(j, unit) }")
    c = parse_term("fix t : Out @ L1 { \\j => throw(j, unit) }")
    assert alpha_eq(a, b)
    assert not alpha_eq(a, c)
    assert not alpha_eq(Var("x"), Var("y"))


@given(st.sampled_from(["'a", "'b", "^p", 0, 1]), st.lists(st.sampled_from(["'c", "^q", 2])))
def test_substituting_an_absent_name_is_the_identity(name, atoms):
    eff = EffectSet(tuple(atoms))
    assert Substitution({name: EffectSet.of(9)}).effects(eff) == eff


HANDLERS = st.builds(
    lambda s, k, arg, label: parse_term(
        f"fix {s} : Out @ L{label} {{ \\{k} => throw({k}, {arg.replace('@', k)}) }}"),
    st.sampled_from(["s", "t"]), st.sampled_from(["k", "j"]),
    st.sampled_from(["unit", "x", "@", "y"]), st.sampled_from([0, 1]),
)


@given(HANDLERS)
def test_alpha_equivalence_is_reflexive(a):
    assert alpha_eq(a, a)


@given(HANDLERS, HANDLERS)
def test_alpha_equivalence_is_symmetric(a, b):
    assert alpha_eq(a, b) == alpha_eq(b, a)


@given(HANDLERS, HANDLERS, HANDLERS)
def test_alpha_equivalence_is_transitive(a, b, c):
    if alpha_eq(a, b) and alpha_eq(b, c):
        assert alpha_eq(a, c)
