"""Capture-avoiding substitution and alpha-equivalence.

One mapping drives every sort: keys are term-variable names, effect
variables, lifetime variables or labels, and the replacement's kind follows
the key (a value, an EffectSet, or a Lifetime). Subtrees whose free-name
set misses every key are returned untouched.
"""
import logging
from itertools import count

from core.syntax import (
    App, Arrow, Cont, ContT, EApp, EAppK, ELam, EffectSet, Fix, ForallEff,
    ForallLife, IfaceT, KLam, LApp, LAppK, LLam, Let, LetK, Numeral, OpT,
    OpVal, RegionNew, Reset, ResetK, Result, Throw, ThrowK, UnitT, UnitVal,
    Unroll, Up, Var, VLam, AppArgK, AppFunK, InterfaceDecl, Program,
    is_effect_var, is_label, is_life_var,
)

log = logging.getLogger(__name__)


def fresh_name(base, avoid):
    """Deterministic fresh name of the same sort as ``base``."""
    if is_label(base):
        return max([a for a in avoid if isinstance(a, int)] + [base]) + 1
    stem = base.rstrip("0123456789").rstrip("_") or base
    for n in count(1):
        candidate = f"{stem}_{n}"
        if candidate not in avoid:
            return candidate


def _replacement_free(mapping) -> frozenset:
    out = set()
    for key, rep in mapping.items():
        if isinstance(rep, (str, int)):
            out.add(rep)
        else:
            out |= rep.free
    return frozenset(out)


def _renaming(binder, renamed):
    if is_effect_var(binder):
        return EffectSet.of(renamed)
    if is_life_var(binder) or is_label(binder):
        return renamed
    return Var(renamed)


class Substitution:
    def __init__(self, mapping):
        self.mapping = dict(mapping)
        self.keys = frozenset(self.mapping)
        self.rfree = _replacement_free(self.mapping)

    def touches(self, node) -> bool:
        return not self.keys.isdisjoint(node.free)

    def under(self, binder, body_free):
        """Substitution and binder name to use below ``binder``."""
        mapping = self.mapping
        if binder in mapping:
            mapping = {k: v for k, v in mapping.items() if k != binder}
        if binder in self.rfree and not frozenset(mapping).isdisjoint(body_free):
            renamed = fresh_name(binder, self.rfree | body_free | frozenset(mapping))
            mapping = dict(mapping)
            mapping[binder] = _renaming(binder, renamed)
            return Substitution(mapping), renamed
        if mapping is self.mapping:
            return self, binder
        return Substitution(mapping), binder

    # ----- atoms -----

    def life(self, life):
        rep = self.mapping.get(life)
        return life if rep is None else rep

    def effects(self, eff: EffectSet) -> EffectSet:
        if self.keys.isdisjoint(eff.free):
            return eff
        out = []
        for atom in eff.items:
            rep = self.mapping.get(atom)
            if rep is None:
                out.append(atom)
            elif isinstance(rep, EffectSet):
                out.extend(rep.items)
            else:
                out.append(rep)
        return EffectSet(tuple(out))

    # ----- types -----

    def ty(self, t):
        if not self.touches(t):
            return t
        if isinstance(t, IfaceT):
            return IfaceT(t.name, tuple(self.effects(a) for a in t.args), self.life(t.life))
        if isinstance(t, OpT):
            return OpT(self.sig(t.sig), self.life(t.life))
        if isinstance(t, ContT):
            return ContT(self.ty(t.src), self.effects(t.src_eff), self.ty(t.dst), self.effects(t.dst_eff))
        return t

    def sig(self, s):
        if not self.touches(s):
            return s
        if isinstance(s, (ForallEff, ForallLife)):
            inner, var = self.under(s.var, s.body.free)
            return type(s)(var, inner.sig(s.body))
        if isinstance(s, Arrow):
            return Arrow(self.ty(s.param), self.sig(s.body))
        return Result(self.ty(s.ty), self.effects(s.eff))

    # ----- operation bodies -----

    def opbody(self, m):
        if not self.touches(m):
            return m
        inner, var = self.under(m.var, m.body.free)
        if isinstance(m, KLam):
            return KLam(var, inner.term(m.body))
        return type(m)(var, inner.opbody(m.body))

    # ----- terms -----

    def term(self, t):
        if not self.touches(t):
            return t
        span = t.span
        if isinstance(t, Var):
            rep = self.mapping[t.name]
            return rep
        if isinstance(t, Fix):
            inner, var = self.under(t.self_var, t.body.free)
            return Fix(var, inner.opbody(t.body), self.life(t.life), t.iface,
                       tuple(self.effects(a) for a in t.args), t.tag, span)
        if isinstance(t, OpVal):
            sig = self.sig(t.sig) if t.sig is not None else None
            return OpVal(self.opbody(t.body), self.life(t.life), sig, t.tag, span)
        if isinstance(t, Numeral):
            return Numeral(t.n, self.life(t.life), span)
        if isinstance(t, Unroll):
            return Unroll(self.term(t.term), span)
        if isinstance(t, EApp):
            return EApp(self.term(t.term), self.effects(t.eff), span)
        if isinstance(t, LApp):
            return LApp(self.term(t.term), self.life(t.life), span)
        if isinstance(t, App):
            return App(self.term(t.fn), self.term(t.arg), span)
        if isinstance(t, RegionNew):
            inner, label = self.under(t.label, t.body.free)
            return RegionNew(label, inner.term(t.body), span)
        if isinstance(t, Up):
            return Up(self.term(t.term), span)
        if isinstance(t, Let):
            inner, var = self.under(t.var, t.body.free)
            return Let(var, self.term(t.bound), inner.term(t.body), span)
        if isinstance(t, Throw):
            return Throw(self.term(t.cont), self.term(t.arg), span)
        if isinstance(t, Reset):
            return Reset(self.life(t.label), self.term(t.body), span)
        return t

    def frame(self, f):
        if isinstance(f, EAppK):
            return EAppK(self.effects(f.eff))
        if isinstance(f, LAppK):
            return LAppK(self.life(f.life))
        if isinstance(f, AppFunK):
            return AppFunK(self.term(f.arg))
        if isinstance(f, AppArgK):
            return AppArgK(self.term(f.fn))
        if isinstance(f, LetK):
            inner, var = self.under(f.var, f.body.free)
            return LetK(var, inner.term(f.body))
        if isinstance(f, ThrowK):
            return ThrowK(self.term(f.arg))
        if isinstance(f, ResetK):
            return ResetK(self.life(f.label))
        return f

    def any(self, node):
        if isinstance(node, EffectSet):
            return self.effects(node)
        if isinstance(node, (UnitT, IfaceT, OpT, ContT)):
            return self.ty(node)
        if isinstance(node, (ForallEff, ForallLife, Arrow, Result)):
            return self.sig(node)
        if isinstance(node, (ELam, LLam, VLam, KLam)):
            return self.opbody(node)
        if isinstance(node, tuple):
            return tuple(self.frame(f) for f in node)
        return self.term(node)


def subst_effect(target, var: str, replacement: EffectSet):
    return Substitution({var: replacement}).any(target)


def subst_life(target, var, replacement):
    """Replace a lifetime variable, or a label, by ``replacement``."""
    return Substitution({var: replacement}).any(target)


def subst_value(target, var: str, value):
    return Substitution({var: value}).any(target)


def instantiate(decl: InterfaceDecl, args, life=None):
    """Signature of an object ``decl.name[args] @ life``."""
    mapping = dict(zip(decl.params, args))
    if decl.home is not None and life is not None:
        mapping[decl.home] = life
    return Substitution(mapping).sig(decl.sig) if mapping else decl.sig


def relabel_interfaces(table: dict, label, fresh) -> dict:
    """Interface table whose signatures name ``fresh`` wherever they named ``label``."""
    out = {}
    for name, decl in table.items():
        if label in decl.sig.free:
            decl = InterfaceDecl(decl.name, decl.params, subst_life(decl.sig, label, fresh),
                                 decl.span, decl.home)
        out[name] = decl
    return out


# ---------- alpha-equivalence ----------

class _Alpha:
    """Compares two trees under a pair of binder environments."""

    def __init__(self):
        self.left = {}
        self.right = {}
        self.depth = 0

    def bind(self, a, b):
        self.depth += 1
        saved = (self.left.get(a), self.right.get(b))
        self.left[a] = self.depth
        self.right[b] = self.depth
        return a, b, saved

    def unbind(self, token):
        a, b, (sa, sb) = token
        self.depth -= 1
        if sa is None:
            self.left.pop(a, None)
        else:
            self.left[a] = sa
        if sb is None:
            self.right.pop(b, None)
        else:
            self.right[b] = sb

    def name(self, a, b) -> bool:
        la, rb = self.left.get(a), self.right.get(b)
        if la is None and rb is None:
            return a == b
        return la == rb

    def effects(self, x: EffectSet, y: EffectSet) -> bool:
        if len(x) != len(y):
            return False
        norm = lambda s, env: frozenset(("b", env[a]) if a in env else ("f", a) for a in s.items)
        return norm(x, self.left) == norm(y, self.right)

    def binder(self, a, b, check):
        token = self.bind(a, b)
        try:
            return check()
        finally:
            self.unbind(token)

    def ty(self, x, y) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, UnitT):
            return True
        if isinstance(x, IfaceT):
            return (x.name == y.name and len(x.args) == len(y.args) and self.name(x.life, y.life)
                    and all(self.effects(a, b) for a, b in zip(x.args, y.args)))
        if isinstance(x, OpT):
            return self.name(x.life, y.life) and self.sig(x.sig, y.sig)
        return (self.ty(x.src, y.src) and self.effects(x.src_eff, y.src_eff)
                and self.ty(x.dst, y.dst) and self.effects(x.dst_eff, y.dst_eff))

    def sig(self, x, y) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, (ForallEff, ForallLife)):
            return self.binder(x.var, y.var, lambda: self.sig(x.body, y.body))
        if isinstance(x, Arrow):
            return self.ty(x.param, y.param) and self.sig(x.body, y.body)
        return self.ty(x.ty, y.ty) and self.effects(x.eff, y.eff)

    def opbody(self, x, y) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, KLam):
            return self.binder(x.var, y.var, lambda: self.term(x.body, y.body))
        return self.binder(x.var, y.var, lambda: self.opbody(x.body, y.body))

    def frames(self, xs, ys) -> bool:
        if len(xs) != len(ys):
            return False
        for f, g in zip(xs, ys):
            if type(f) is not type(g):
                return False
            if isinstance(f, EAppK) and not self.effects(f.eff, g.eff):
                return False
            if isinstance(f, LAppK) and not self.name(f.life, g.life):
                return False
            if isinstance(f, AppFunK) and not self.term(f.arg, g.arg):
                return False
            if isinstance(f, AppArgK) and not self.term(f.fn, g.fn):
                return False
            if isinstance(f, LetK) and not self.binder(f.var, g.var, lambda f=f, g=g: self.term(f.body, g.body)):
                return False
            if isinstance(f, ThrowK) and not self.term(f.arg, g.arg):
                return False
            if isinstance(f, ResetK) and f.label != g.label:
                return False
        return True

    def term(self, x, y) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, Var):
            return self.name(x.name, y.name)
        if isinstance(x, UnitVal):
            return True
        if isinstance(x, Fix):
            return (x.iface == y.iface and x.tag == y.tag and self.name(x.life, y.life)
                    and len(x.args) == len(y.args)
                    and all(self.effects(a, b) for a, b in zip(x.args, y.args))
                    and self.binder(x.self_var, y.self_var, lambda: self.opbody(x.body, y.body)))
        if isinstance(x, OpVal):
            if (x.sig is None) != (y.sig is None):
                return False
            return (x.tag == y.tag and self.name(x.life, y.life) and self.opbody(x.body, y.body)
                    and (x.sig is None or self.sig(x.sig, y.sig)))
        if isinstance(x, Numeral):
            return x.n == y.n and self.name(x.life, y.life)
        if isinstance(x, Cont):
            return (self.ty(x.src, y.src) and self.effects(x.src_eff, y.src_eff)
                    and self.frames(x.frames, y.frames))
        if isinstance(x, (Unroll, Up)):
            return self.term(x.term, y.term)
        if isinstance(x, EApp):
            return self.effects(x.eff, y.eff) and self.term(x.term, y.term)
        if isinstance(x, LApp):
            return self.name(x.life, y.life) and self.term(x.term, y.term)
        if isinstance(x, App):
            return self.term(x.fn, y.fn) and self.term(x.arg, y.arg)
        if isinstance(x, RegionNew):
            return self.binder(x.label, y.label, lambda: self.term(x.body, y.body))
        if isinstance(x, Let):
            return self.term(x.bound, y.bound) and self.binder(x.var, y.var, lambda: self.term(x.body, y.body))
        if isinstance(x, Throw):
            return self.term(x.cont, y.cont) and self.term(x.arg, y.arg)
        if isinstance(x, Reset):
            return self.name(x.label, y.label) and self.term(x.body, y.body)
        return x == y


def alpha_eq(a, b) -> bool:
    """Equality up to renaming of bound names; free labels compare literally."""
    checker = _Alpha()
    if isinstance(a, Program) and isinstance(b, Program):
        return (_same_interfaces(a, b) and checker.term(a.main, b.main))
    if isinstance(a, EffectSet):
        return isinstance(b, EffectSet) and checker.effects(a, b)
    if isinstance(a, (UnitT, IfaceT, OpT, ContT)):
        return checker.ty(a, b)
    if isinstance(a, (ForallEff, ForallLife, Arrow, Result)):
        return checker.sig(a, b)
    if isinstance(a, tuple):
        return isinstance(b, tuple) and checker.frames(a, b)
    return checker.term(a, b)


def _same_interfaces(a: Program, b: Program) -> bool:
    left = {d.name: d for d in a.interfaces}
    right = {d.name: d for d in b.interfaces}
    if left.keys() != right.keys():
        return False
    return all(_same_decl(left[name], right[name]) for name in left)


def _same_decl(x: InterfaceDecl, y: InterfaceDecl) -> bool:
    if len(x.params) != len(y.params) or (x.home is None) != (y.home is None):
        return False
    checker = _Alpha()
    for p, q in zip(x.params, y.params):
        checker.bind(p, q)
    if x.home is not None:
        checker.bind(x.home, y.home)
    return checker.sig(x.sig, y.sig)
