"""Callback-style translation of tail-resumptive bidirectional programs.

An operation of a translated interface no longer answers with its result.
Its handler answers at once with a thunk, an operation value living at the
program's own region, and the raise site forces that thunk with a second
raise. The thunk's effects carry the handler's own lifetime, so the rest of
the handler may still raise to the handler being defined.
"""
import logging

from utils.diagnostics import Untranslatable
from core.printer import summarize
from core.subst import Substitution, fresh_name, instantiate
from core.syntax import (
    App, Arrow, EApp, ELam, EMPTY, EffectSet, Fix, ForallEff, ForallLife,
    IfaceT, InterfaceDecl, KLam, LApp, LLam, Let, Numeral, OpT, OpVal, Program,
    RegionNew, Reset, Result, Throw, Unroll, Up, Var, VLam,
)

log = logging.getLogger(__name__)

OUT = "Out"


def translatable_interfaces(program: Program) -> frozenset:
    """User interfaces with at least one handler, plus ``Out`` when the program emits."""
    handled = {fix.iface for fix in _fixes(program.main)}
    out = {decl.name for decl in program.interfaces if decl.name in handled}
    if OUT in handled and OUT not in out:
        out.add(OUT)
    return frozenset(out)


def _fixes(term):
    todo = [term]
    while todo:
        node = todo.pop()
        if isinstance(node, Fix):
            yield node
        for name in getattr(node, "__slots__", ()):
            if name in ("free", "span"):
                continue
            child = getattr(node, name)
            if isinstance(child, tuple):
                todo.extend(child)
            elif hasattr(child, "__slots__"):
                todo.append(child)


def _binders(sig) -> set:
    out = set()
    while not isinstance(sig, Result):
        if isinstance(sig, (ForallEff, ForallLife)):
            out.add(sig.var)
        sig = sig.body
    return out


def callback_sig(sig, home: str, label):
    """``... -> R ! e`` becomes ``... -> op(R ! e + {home}) @ label ! {}``."""
    if isinstance(sig, Result):
        return Result(OpT(Result(sig.ty, sig.eff | EffectSet.of(home)), label), EMPTY)
    if isinstance(sig, Arrow):
        return Arrow(sig.param, callback_sig(sig.body, home, label))
    return type(sig)(sig.var, callback_sig(sig.body, home, label))


def callback_decl(decl: InterfaceDecl, name: str, label) -> InterfaceDecl:
    taken = decl.sig.free | _binders(decl.sig) | set(decl.params)
    home = "^h" if "^h" not in taken else fresh_name("^h", taken)
    return InterfaceDecl(name, decl.params, callback_sig(decl.sig, home, label), decl.span, home)


class CallbackTranslator:
    def __init__(self, program: Program, targets: frozenset):
        self.source = program.table()
        self.targets = targets
        self.label = program.label
        self.renamed = {}
        if OUT in targets:
            self.renamed[OUT] = fresh_name(OUT, set(self.source))
        self.table = {
            name: callback_decl(decl, self.renamed.get(name, name), self.label)
            for name, decl in self.source.items() if name in targets
        }

    # ---------- interfaces of raise sites ----------

    def head_iface(self, t, env: dict):
        """Interface of the object whose operation ``t`` exposes, when known."""
        while isinstance(t, (App, LApp, EApp)):
            t = t.fn if isinstance(t, App) else t.term
        if not isinstance(t, Unroll):
            return None
        return self.value_iface(t.term, env)

    def value_iface(self, t, env):
        if isinstance(t, Fix):
            return t.iface
        if isinstance(t, Numeral):
            return "Nat"
        if isinstance(t, Var):
            return env.get(t.name)
        return None

    # ---------- rewriting ----------

    def term(self, t, env: dict):
        if isinstance(t, Up):
            inner = Up(self.term(t.term, env), t.span)
            if self.head_iface(t.term, env) in self.targets:
                return Up(inner, t.span)
            return inner
        if isinstance(t, Let):
            bound = self.term(t.bound, env)
            return Let(t.var, bound, self.term(t.body, _bind(env, t.var, self.value_iface(t.bound, env))), t.span)
        if isinstance(t, Fix):
            return self.fix(t, env)
        if isinstance(t, OpVal):
            return OpVal(self.opbody(t.body, t.sig, env, None), t.life, t.sig, t.tag, t.span)
        if isinstance(t, Unroll):
            return Unroll(self.term(t.term, env), t.span)
        if isinstance(t, EApp):
            return EApp(self.term(t.term, env), t.eff, t.span)
        if isinstance(t, LApp):
            return LApp(self.term(t.term, env), t.life, t.span)
        if isinstance(t, App):
            return App(self.term(t.fn, env), self.term(t.arg, env), t.span)
        if isinstance(t, RegionNew):
            return RegionNew(t.label, self.term(t.body, env), t.span)
        if isinstance(t, Reset):
            return Reset(t.label, self.term(t.body, env), t.span)
        if isinstance(t, Throw):
            return Throw(self.term(t.cont, env), self.term(t.arg, env), t.span)
        return t

    def fix(self, t: Fix, env: dict) -> Fix:
        inner = _bind(env, t.self_var, t.iface)
        if t.iface not in self.targets:
            sig = self.source[t.iface].sig if t.iface in self.source else None
            body = self.opbody(t.body, sig, inner, None)
            return Fix(t.self_var, body, t.life, t.iface, t.args, t.tag, t.span)
        sig = instantiate(self.table[t.iface], t.args, t.life)
        body = self.opbody(t.body, sig, inner, t)
        return Fix(t.self_var, body, t.life, self.renamed.get(t.iface, t.iface), t.args, t.tag, t.span)

    def opbody(self, m, sig, env: dict, handler):
        """Rewrite an operation body; ``sig`` follows the body's own binder names."""
        if isinstance(m, (ELam, LLam)):
            body_sig = None
            if isinstance(sig, (ForallEff, ForallLife)):
                rep = EffectSet.of(m.var) if isinstance(sig, ForallEff) else m.var
                body_sig = sig.body if sig.var == m.var else Substitution({sig.var: rep}).sig(sig.body)
            return type(m)(m.var, self.opbody(m.body, body_sig, _bind(env, m.var, None), handler))
        if isinstance(m, VLam):
            param = sig.param if isinstance(sig, Arrow) else None
            iface = param.name if isinstance(param, IfaceT) else None
            body_sig = sig.body if isinstance(sig, Arrow) else None
            return VLam(m.var, self.opbody(m.body, body_sig, _bind(env, m.var, iface), handler))
        body = self.term(m.body, _bind(env, m.var, None))
        if handler is None:
            return KLam(m.var, body)
        return KLam(m.var, self.thunk_answer(m.var, body, sig, handler))

    def thunk_answer(self, k: str, body, sig, handler: Fix):
        """``throw(k, c)`` becomes ``throw(k, op<R ! e> @ L { \\k2 => throw(k2, c) })``."""
        if not (isinstance(body, Throw) and isinstance(body.cont, Var) and body.cont.name == k
                and k not in body.arg.free):
            raise Untranslatable(f"handler for {handler.iface} is not tail resumptive",
                                 span=handler.span, detail=summarize(body))
        if not (isinstance(sig, Result) and isinstance(sig.ty, OpT)):
            raise Untranslatable(f"handler for {handler.iface} does not follow its signature",
                                 span=handler.span)
        rest = body.arg
        k2 = fresh_name(k, set(rest.free) | {k})
        thunk = OpVal(KLam(k2, Throw(Var(k2), rest, body.span)), self.label, sig.ty.sig, None, body.span)
        return Throw(Var(k), thunk, body.span)

    def program(self, program: Program) -> Program:
        main = self.term(program.main, {})
        interfaces = []
        for decl in program.interfaces:
            interfaces.append(self.table.get(decl.name, decl))
        if OUT in self.renamed:
            interfaces.append(self.table[OUT])
        return Program(tuple(interfaces), program.label, main)


def _bind(env: dict, name: str, iface) -> dict:
    out = dict(env)
    out[name] = iface
    return out


def callback_translate(program: Program) -> Program:
    """Callback variant of ``program``; the observable token trace is unchanged."""
    targets = translatable_interfaces(program)
    if not targets:
        raise Untranslatable("the program handles no operations")
    translator = CallbackTranslator(program, targets)
    out = translator.program(program)
    log.info("callback translation of %s", ", ".join(sorted(targets)))
    return out
