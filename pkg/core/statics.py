"""Type-and-effect checking for core programs.

The checker synthesizes the least type and effect of a term and applies
subsumption only where a term is consumed: function arguments, throw
operands, handler bodies and region bodies. Effects are sets and
subeffecting is inclusion.

A region's ascription ``Σ(ℓ) = T ! ε`` is computed, not written: the body
is checked once with handler bodies at ℓ deferred to learn ``T`` and the
effects the body itself raises, then handler bodies are checked against the
growing ascription until no handler adds an effect.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

from utils.diagnostics import OlafTypeError
from core.printer import print_effects, print_life, print_type
from core.subst import fresh_name, instantiate, subst_effect, subst_life, Substitution
from core.syntax import (
    App, Arrow, AppArgK, AppFunK, BUILTIN_INTERFACES, Cont, ContT, EApp, EAppK,
    ELam, EMPTY, EffectSet, Fix, ForallEff, ForallLife, IfaceT, KLam, LApp,
    LAppK, LLam, Let, LetK, Numeral, OpT, OpVal, Program, RegionNew, Reset,
    ResetK, Result, Throw, ThrowK, UNIT, UnitT, UnitVal, Unroll, UnrollK, Up,
    UpK, Var, VLam, is_effect_var, is_label, is_life_var,
)

log = logging.getLogger(__name__)

DEFERRED = object()


@dataclass(frozen=True)
class TypingResult:
    ty: object
    eff: EffectSet

    def __iter__(self):
        return iter((self.ty, self.eff))

    def render(self) -> str:
        return f"{print_type(self.ty)} ! {print_effects(self.eff)}"


@dataclass(frozen=True, eq=False)
class TypingEnv:
    """Δ (effect variables), Φ (lifetime variables), Γ, Σ and the interface table."""
    effect_vars: frozenset = frozenset()
    life_vars: frozenset = frozenset()
    term_vars: dict = field(default_factory=dict)
    label_sigs: dict = field(default_factory=dict)
    interfaces: dict = field(default_factory=lambda: dict(BUILTIN_INTERFACES))
    runtime: bool = False
    collect: Optional[dict] = None
    ascribed: Optional[dict] = None

    def with_var(self, name, ty):
        return replace(self, term_vars={**self.term_vars, name: ty})

    def with_effect_var(self, name):
        return replace(self, effect_vars=self.effect_vars | {name})

    def with_life_var(self, name):
        return replace(self, life_vars=self.life_vars | {name})

    def with_label(self, label, sig):
        return replace(self, label_sigs={**self.label_sigs, label: sig})

    def bound(self) -> frozenset:
        return self.effect_vars | self.life_vars | frozenset(self.label_sigs) | frozenset(self.term_vars)

    def binds(self, atom) -> bool:
        if is_effect_var(atom):
            return atom in self.effect_vars
        if is_life_var(atom):
            return atom in self.life_vars
        return atom in self.label_sigs


def _fail(code, message, span, rule=None, detail=None):
    raise OlafTypeError(code, message, span=span, detail=detail, rule=rule)


# ---------- well-formedness ----------

def wf_effects(env: TypingEnv, eff: EffectSet, span=None):
    for atom in eff.items:
        if not env.binds(atom):
            _fail("IllFormedType", f"unbound effect {print_life(atom)}", span, "wf-effect")


def wf_life(env: TypingEnv, life, span=None, rule="wf-life"):
    if is_label(life):
        if life not in env.label_sigs:
            _fail("UnboundLabel", f"label {print_life(life)} is not in scope", span, rule)
    elif life not in env.life_vars:
        _fail("IllFormedType", f"unbound lifetime {life}", span, rule)


def wf_type(env: TypingEnv, ty, span=None):
    if isinstance(ty, UnitT):
        return
    if isinstance(ty, IfaceT):
        decl = env.interfaces.get(ty.name)
        if decl is None:
            _fail("IllFormedType", f"unknown interface {ty.name}", span, "wf-iface")
        if len(decl.params) != len(ty.args):
            _fail("ArityMismatch", f"interface {ty.name} takes {len(decl.params)} effect arguments, "
                  f"got {len(ty.args)}", span, "wf-iface")
        for arg in ty.args:
            wf_effects(env, arg, span)
        _wf_type_life(env, ty.life, span)
        return
    if isinstance(ty, OpT):
        wf_sig(env, ty.sig, span)
        _wf_type_life(env, ty.life, span)
        return
    if isinstance(ty, ContT):
        wf_type(env, ty.src, span)
        wf_effects(env, ty.src_eff, span)
        wf_type(env, ty.dst, span)
        wf_effects(env, ty.dst_eff, span)
        return
    _fail("IllFormedType", f"not a type: {ty!r}", span)


def _wf_type_life(env, life, span):
    if not env.binds(life):
        _fail("IllFormedType", f"unbound lifetime {print_life(life)}", span, "wf-life")


def wf_sig(env: TypingEnv, sig, span=None):
    while True:
        if isinstance(sig, ForallEff):
            env = env.with_effect_var(sig.var)
        elif isinstance(sig, ForallLife):
            env = env.with_life_var(sig.var)
        elif isinstance(sig, Arrow):
            wf_type(env, sig.param, span)
        elif isinstance(sig, Result):
            wf_type(env, sig.ty, span)
            wf_effects(env, sig.eff, span)
            return
        else:
            _fail("IllFormedType", f"not a signature: {sig!r}", span)
        sig = sig.body


def wf_env(env: TypingEnv):
    for label, entry in env.label_sigs.items():
        if entry is DEFERRED:
            continue
        ty, eff = entry
        if label in ty.free or label in eff:
            _fail("IllFormedType", f"ascription of {print_life(label)} mentions itself", None, "wf-sigma")
        wf_type(env, ty)
        wf_effects(env, eff)
    for name, ty in env.term_vars.items():
        wf_type(env, ty)


def wf_interfaces(table: dict, program_label=None):
    """Signatures may name their parameters, their home lifetime and the program label."""
    empty = TypingEnv(interfaces=table)
    if program_label is not None:
        empty = empty.with_label(program_label, DEFERRED)
    for decl in table.values():
        env = empty
        for p in decl.params:
            env = env.with_effect_var(p)
        if decl.home is not None:
            env = env.with_life_var(decl.home)
        try:
            wf_sig(env, decl.sig, decl.span)
        except OlafTypeError as exc:
            exc.detail = f"in interface {decl.name}"
            raise


# ---------- orderings ----------

def sub_effect(env, e1: EffectSet, e2: EffectSet) -> bool:
    return e1.issubset(e2)


def sub_type(env, t1, t2) -> bool:
    if isinstance(t1, UnitT) or isinstance(t2, UnitT):
        return isinstance(t1, UnitT) and isinstance(t2, UnitT)
    if isinstance(t1, IfaceT):
        return t1 == t2
    if isinstance(t1, OpT):
        return isinstance(t2, OpT) and t1.life == t2.life and sub_sig(env, t1.sig, t2.sig)
    if isinstance(t1, ContT):
        return (isinstance(t2, ContT)
                and sub_type(env, t2.src, t1.src) and sub_effect(env, t2.src_eff, t1.src_eff)
                and sub_type(env, t1.dst, t2.dst) and sub_effect(env, t1.dst_eff, t2.dst_eff))
    return False


def sub_sig(env, s1, s2) -> bool:
    if isinstance(s1, (ForallEff, ForallLife)):
        if type(s1) is not type(s2):
            return False
        if s1.var == s2.var:
            return sub_sig(env, s1.body, s2.body)
        v = fresh_name(s1.var, s1.free | s2.free | {s1.var, s2.var})
        rep = EffectSet.of(v) if isinstance(s1, ForallEff) else v
        return sub_sig(env, Substitution({s1.var: rep}).sig(s1.body), Substitution({s2.var: rep}).sig(s2.body))
    if isinstance(s1, Arrow):
        return isinstance(s2, Arrow) and sub_type(env, s2.param, s1.param) and sub_sig(env, s1.body, s2.body)
    if isinstance(s1, Result):
        return isinstance(s2, Result) and sub_type(env, s1.ty, s2.ty) and sub_effect(env, s1.eff, s2.eff)
    return False


# ---------- eliminations shared by terms and contexts ----------

def unroll_iface(env: TypingEnv, ty, span=None) -> OpT:
    if not isinstance(ty, IfaceT):
        _fail("NotAnOperation", f"cannot unroll a value of type {print_type(ty)}", span, "t-op")
    decl = env.interfaces.get(ty.name)
    if decl is None:
        _fail("IllFormedType", f"unknown interface {ty.name}", span, "t-op")
    if len(decl.params) != len(ty.args):
        _fail("ArityMismatch", f"interface {ty.name} takes {len(decl.params)} effect arguments", span, "t-op")
    return OpT(instantiate(decl, ty.args, ty.life), ty.life)


def inst_effect(env, ty, eff: EffectSet, span=None) -> OpT:
    if not (isinstance(ty, OpT) and isinstance(ty.sig, ForallEff)):
        _fail("NotAnOperation", f"effect application to {print_type(ty)}", span, "t-eapp")
    wf_effects(env, eff, span)
    return OpT(subst_effect(ty.sig.body, ty.sig.var, eff), ty.life)


def inst_life(env, ty, life, span=None) -> OpT:
    if not (isinstance(ty, OpT) and isinstance(ty.sig, ForallLife)):
        _fail("NotAnOperation", f"lifetime application to {print_type(ty)}", span, "t-lapp")
    wf_life(env, life, span, "t-lapp")
    return OpT(subst_life(ty.sig.body, ty.sig.var, life), ty.life)


def apply_arg(env, fn_ty, arg_ty, span=None) -> OpT:
    if not (isinstance(fn_ty, OpT) and isinstance(fn_ty.sig, Arrow)):
        _fail("NotAnOperation", f"value application to {print_type(fn_ty)}", span, "t-app")
    if not sub_type(env, arg_ty, fn_ty.sig.param):
        _fail("SubtypeFailure", f"argument of type {print_type(arg_ty)} where "
              f"{print_type(fn_ty.sig.param)} is expected", span, "t-app")
    return OpT(fn_ty.sig.body, fn_ty.life)


def raise_op(env, ty, eff, span=None) -> TypingResult:
    if not (isinstance(ty, OpT) and isinstance(ty.sig, Result)):
        _fail("NotAnOperation", f"cannot raise a value of type {print_type(ty)}", span, "t-up")
    return TypingResult(ty.sig.ty, eff | ty.sig.eff | EffectSet.of(ty.life))


def throw_to(env, cont_ty, cont_eff, arg: TypingResult, span=None) -> TypingResult:
    if not isinstance(cont_ty, ContT):
        _fail("NotAContinuation", f"throw to a value of type {print_type(cont_ty)}", span, "t-throw")
    if not sub_type(env, arg.ty, cont_ty.src):
        _fail("ResumeTypeMismatch", f"resumed with {print_type(arg.ty)} where "
              f"{print_type(cont_ty.src)} is expected", span, "t-throw")
    if not sub_effect(env, arg.eff, cont_ty.src_eff):
        _fail("SubeffectFailure", f"resumption admits {print_effects(cont_ty.src_eff)}, "
              f"computation raises {print_effects(arg.eff)}", span, "t-throw")
    return TypingResult(cont_ty.dst, cont_ty.dst_eff | cont_eff)


def close_reset(env, label, body: TypingResult, span=None) -> TypingResult:
    entry = env.label_sigs.get(label)
    if entry is None or entry is DEFERRED:
        _fail("UnboundLabel", f"no ascription for {print_life(label)}", span, "t-reset")
    ty, eff = entry
    if not sub_type(env, body.ty, ty):
        _fail("SubtypeFailure", f"delimited body has type {print_type(body.ty)}, "
              f"region expects {print_type(ty)}", span, "t-reset")
    if not sub_effect(env, body.eff, eff | EffectSet.of(label)):
        _fail("SubeffectFailure", f"delimited body raises {print_effects(body.eff)}", span, "t-reset")
    return TypingResult(ty, eff)


# ---------- terms ----------

def synth(env: TypingEnv, t, span=None) -> TypingResult:
    """Least type and effect of ``t`` under ``env``."""
    span = getattr(t, "span", None) or span
    if isinstance(t, Var):
        ty = env.term_vars.get(t.name)
        if ty is None:
            _fail("UnboundVar", f"unbound variable {t.name}", span, "t-var")
        return TypingResult(ty, EMPTY)
    if isinstance(t, UnitVal):
        return TypingResult(UNIT, EMPTY)
    if isinstance(t, Numeral):
        if t.n < 0:
            _fail("IllFormedType", "numerals are natural numbers", span, "t-nat")
        if not is_label(t.life):
            _fail("UnboundLabel", "numerals live at a region label", span, "t-nat")
        wf_life(env, t.life, span, "t-nat")
        return TypingResult(IfaceT("Nat", (), t.life), EMPTY)
    if isinstance(t, Fix):
        ty = IfaceT(t.iface, t.args, t.life)
        wf_life(env, t.life, span, "t-fix")
        wf_type(env, ty, span)
        sig = unroll_iface(env, ty, span).sig
        check_opbody(env.with_var(t.self_var, ty), t.body, sig, t.life, span, "t-fix")
        return TypingResult(ty, EMPTY)
    if isinstance(t, OpVal):
        if t.sig is None:
            _fail("IllFormedType", "operation value without a signature", span, "t-opval")
        wf_sig(env, t.sig, span)
        wf_life(env, t.life, span, "t-opval")
        check_opbody(env, t.body, t.sig, t.life, span, "t-opval")
        return TypingResult(OpT(t.sig, t.life), EMPTY)
    if isinstance(t, Cont):
        if not env.runtime:
            _fail("IllFormedType", "continuation values only arise during evaluation", span, "t-cont")
        wf_type(env, t.src, span)
        wf_effects(env, t.src_eff, span)
        out = check_ctx(env, t.frames, t.src, t.src_eff, span)
        return TypingResult(ContT(t.src, t.src_eff, out.ty, out.eff), EMPTY)
    if isinstance(t, Unroll):
        ty, eff = synth(env, t.term, span)
        return TypingResult(unroll_iface(env, ty, span), eff)
    if isinstance(t, EApp):
        ty, eff = synth(env, t.term, span)
        return TypingResult(inst_effect(env, ty, t.eff, span), eff)
    if isinstance(t, LApp):
        ty, eff = synth(env, t.term, span)
        return TypingResult(inst_life(env, ty, t.life, span), eff)
    if isinstance(t, App):
        fn_ty, fn_eff = synth(env, t.fn, span)
        arg_ty, arg_eff = synth(env, t.arg, span)
        return TypingResult(apply_arg(env, fn_ty, arg_ty, span), fn_eff | arg_eff)
    if isinstance(t, Up):
        ty, eff = synth(env, t.term, span)
        return raise_op(env, ty, eff, span)
    if isinstance(t, Let):
        bound_ty, bound_eff = synth(env, t.bound, span)
        body_ty, body_eff = synth(env.with_var(t.var, bound_ty), t.body, span)
        return TypingResult(body_ty, bound_eff | body_eff)
    if isinstance(t, Throw):
        cont_ty, cont_eff = synth(env, t.cont, span)
        return throw_to(env, cont_ty, cont_eff, synth(env, t.arg, span), span)
    if isinstance(t, RegionNew):
        return region_ascription(env, t, span)
    if isinstance(t, Reset):
        if not env.runtime:
            _fail("IllFormedType", "reset only arises during evaluation", span, "t-reset")
        return close_reset(env, t.label, synth(env, t.body, span), span)
    _fail("IllFormedType", f"not a term: {t!r}", span)


def _bind_type_var(env, name, body, sort):
    """Binder name safe to add to Δ/Φ, renaming ``body`` if ``name`` is taken."""
    taken = env.effect_vars if sort == "effect" else env.life_vars
    if name not in taken:
        return name, body
    renamed = fresh_name(name, taken | body.free | env.bound())
    rep = EffectSet.of(renamed) if sort == "effect" else renamed
    return renamed, Substitution({name: rep}).opbody(body)


def check_opbody(env: TypingEnv, m, sig, life, span, rule):
    """Check an operation implementation against the signature it must provide."""
    while True:
        if isinstance(m, ELam) and isinstance(sig, ForallEff):
            var, inner = _bind_type_var(env, m.var, m.body, "effect")
            sig = subst_effect(sig.body, sig.var, EffectSet.of(var)) if sig.var != var else sig.body
            env, m = env.with_effect_var(var), inner
        elif isinstance(m, LLam) and isinstance(sig, ForallLife):
            var, inner = _bind_type_var(env, m.var, m.body, "life")
            sig = subst_life(sig.body, sig.var, var) if sig.var != var else sig.body
            env, m = env.with_life_var(var), inner
        elif isinstance(m, VLam) and isinstance(sig, Arrow):
            env, m, sig = env.with_var(m.var, sig.param), m.body, sig.body
        elif isinstance(m, KLam) and isinstance(sig, Result):
            _check_resumption(env, m, sig, life, span)
            return
        else:
            _fail("SelfTypeMismatch", "handler body does not follow its signature", span, rule,
                  detail=f"{type(m).__name__} against {type(sig).__name__}")


def _check_resumption(env: TypingEnv, m: KLam, sig: Result, life, span):
    if not is_label(life):
        _fail("UnboundLabel", f"handlers live at a region label, not {print_life(life)}", span, "t-klam")
    entry = env.label_sigs.get(life)
    if entry is None:
        _fail("UnboundLabel", f"label {print_life(life)} is not in scope", span, "t-klam")
    if entry is DEFERRED:
        return
    region_ty, region_eff = entry
    k_ty = ContT(sig.ty, sig.eff | EffectSet.of(life), region_ty, region_eff)
    body = synth(env.with_var(m.var, k_ty), m.body, span)
    if not sub_type(env, body.ty, region_ty):
        _fail("SubtypeFailure", f"handler body has type {print_type(body.ty)}, its region "
              f"{print_life(life)} has type {print_type(region_ty)}", span, "t-klam")
    extra = body.eff - region_eff
    if extra:
        if env.collect is not None and life in env.collect:
            env.collect[life].update(extra.items)
        else:
            _fail("SubeffectFailure", f"handler body raises {print_effects(extra)} beyond its region's "
                  f"{print_effects(region_eff)}", span, "t-klam")


def _ascription_key(env: TypingEnv, t: RegionNew):
    return (id(t), frozenset(env.label_sigs), env.effect_vars, env.life_vars,
            frozenset(env.term_vars.items()), env.runtime)


def region_ascription(env: TypingEnv, t: RegionNew, span=None) -> TypingResult:
    if env.ascribed is None:
        env = replace(env, ascribed={})
    label, body = t.label, t.body
    if label in env.label_sigs:
        renamed = fresh_name(label, frozenset(env.label_sigs) | body.free)
        body = subst_life(body, label, renamed)
        label = renamed
    key = _ascription_key(env, t)
    known = env.ascribed.get(key)
    if known is not None and known[0] is t:
        # later passes of an enclosing region only re-check handlers at outer labels
        result = known[1]
        collect = {**(env.collect or {}), label: set()}
        synth(replace(env.with_label(label, (result.ty, result.eff)), collect=collect), body, span)
        return result
    result = _ascribe(env, t, label, body, span)
    env.ascribed[key] = (t, result)
    return result


def _ascribe(env: TypingEnv, t: RegionNew, label, body, span) -> TypingResult:
    first = synth(env.with_label(label, DEFERRED), body, span)
    if label in first.ty.free:
        _fail("EffectEscape", f"region {print_life(t.label)} returns a value of type "
              f"{print_type(first.ty)} that mentions its own label", span, "t-down side condition")
    eff = first.eff - {label}
    while True:
        found = set()
        collect = dict(env.collect or {})
        collect[label] = found
        inner = replace(env.with_label(label, (first.ty, eff)), collect=collect)
        synth(inner, body, span)
        extra = EffectSet(tuple(found)) - eff
        if not extra:
            log.debug("region %s ascribed %s ! %s", print_life(label), print_type(first.ty), print_effects(eff))
            return TypingResult(first.ty, eff)
        if label in extra:
            _fail("EffectEscape", f"handlers of region {print_life(t.label)} raise its own label",
                  span, "t-down side condition")
        for atom in extra.items:
            if not env.binds(atom):
                _fail("SubeffectFailure", f"handler effect {print_life(atom)} is not visible outside "
                      f"region {print_life(t.label)}", span, "t-down")
        eff = eff | extra


# ---------- evaluation contexts ----------

def check_ctx(env: TypingEnv, frames, hole_ty, hole_eff: EffectSet, span=None) -> TypingResult:
    """Type a context (outermost frame first) whose hole has ``hole_ty ! hole_eff``."""
    ty, eff = hole_ty, hole_eff
    for frame in reversed(frames):
        if isinstance(frame, UnrollK):
            ty = unroll_iface(env, ty, span)
        elif isinstance(frame, EAppK):
            ty = inst_effect(env, ty, frame.eff, span)
        elif isinstance(frame, LAppK):
            ty = inst_life(env, ty, frame.life, span)
        elif isinstance(frame, AppFunK):
            arg_ty, arg_eff = synth(env, frame.arg, span)
            ty, eff = apply_arg(env, ty, arg_ty, span), eff | arg_eff
        elif isinstance(frame, AppArgK):
            fn_ty, fn_eff = synth(env, frame.fn, span)
            ty, eff = apply_arg(env, fn_ty, ty, span), eff | fn_eff
        elif isinstance(frame, UpK):
            ty, eff = raise_op(env, ty, eff, span)
        elif isinstance(frame, LetK):
            body_ty, body_eff = synth(env.with_var(frame.var, ty), frame.body, span)
            ty, eff = body_ty, eff | body_eff
        elif isinstance(frame, ThrowK):
            ty, eff = throw_to(env, ty, eff, synth(env, frame.arg, span), span)
        elif isinstance(frame, ResetK):
            ty, eff = close_reset(env, frame.label, TypingResult(ty, eff), span)
        else:
            _fail("IllFormedType", f"not a frame: {frame!r}", span)
    return TypingResult(ty, eff)


# ---------- entry points ----------

def check_term(env: TypingEnv, t) -> TypingResult:
    wf_env(env)
    return synth(env, t)


def check_program(program: Program) -> TypingResult:
    table = program.table()
    wf_interfaces(table, program.label)
    result = synth(TypingEnv(interfaces=table), program.main)
    log.info("program checks at %s", result.render())
    return result


def runtime_env(interfaces: dict, label_sigs: dict) -> TypingEnv:
    return TypingEnv(interfaces=interfaces, label_sigs=dict(label_sigs), runtime=True)


def check_runtime(env: TypingEnv, t) -> TypingResult:
    return check_term(replace(env, runtime=True), t)
