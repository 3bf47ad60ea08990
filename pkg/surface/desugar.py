"""Handler resolution and desugaring of surface programs into core programs.

A ``try`` becomes a fresh region whose handlers are let-bound ``fix``
objects at the region's label; ``resume`` throws to the handler's
resumption and ``self`` is the handler's own fixpoint variable. Functions
become objects at the program label whose bodies run in a tail resumption.
Each interface a function raises becomes one more lifetime and handler
parameter pair; calls supply the innermost binding of that interface.
"""
import logging
from dataclasses import dataclass, field

from utils.diagnostics import DesugarError
from core.subst import Substitution, fresh_name
from core.syntax import (
    App, Arrow, BUILTIN_INTERFACES, EApp, ELam, EffectSet, Fix, ForallEff,
    ForallLife, IfaceT, InterfaceDecl, KLam, LApp, LLam, Let, Numeral, Program,
    RegionNew, Result, Throw, UNIT_VAL, Unroll, Up, Var, VLam, emit,
    is_effect_var, is_label,
)
from surface.parser import SetArg, parse_surface
from surface.syntax import (
    FunDef, HandlerDef, HandlerLife, Invoke, NatLit, OutEmit, Resume, SLet,
    SRegion, SelfRef, Seq, SurfaceProgram, TryWith, TypeArgs, TypeGroup,
    UnitLit, ValueArgs, ValueGroup, VarRef,
)

log = logging.getLogger(__name__)

PROGRAM_LABEL = 0
RESUME = "resume"
SELF = "self"

BUILTIN_OPS = {"Out": "emit", "Nat": "fold", "Succ": "succ"}


def _error(code, message, span=None, detail=None):
    return DesugarError(message, span=span, detail=detail, code=code)


# ---------- signatures ----------

def build_sig(groups, result: Result):
    """Curried core signature for declaration groups ending in ``result``."""
    sig = result
    for group in reversed(groups):
        if isinstance(group, TypeGroup):
            for name in reversed(group.names):
                sig = ForallEff(name, sig) if is_effect_var(name) else ForallLife(name, sig)
        else:
            for ty in reversed(group.types):
                sig = Arrow(ty, sig)
    return sig


def _labels_in_lifetimes(sig) -> set:
    found = set()

    def visit_ty(t):
        if isinstance(t, IfaceT) and is_label(t.life):
            found.add(t.life)

    while not isinstance(sig, Result):
        if isinstance(sig, Arrow):
            visit_ty(sig.param)
        sig = sig.body
    visit_ty(sig.ty)
    return found


def _labels_in_effects(sig) -> set:
    return {a for a in sig.free if is_label(a)}


def _unused(name: str, taken: set) -> str:
    return name if name not in taken else fresh_name(name, taken)


def expand_raises(fun: FunDef) -> FunDef:
    """``fun`` with a lifetime and a handler parameter for each interface it raises."""
    if not fun.implicit:
        return fun
    taken = {n for g in fun.groups for n in g.names} | set(fun.raises.free) | {fun.name}
    groups, raises = list(fun.groups), fun.raises
    for raised in fun.implicit:
        life = _unused("^" + raised.name.lower(), taken)
        taken.add(life)
        var = _unused(raised.name.lower(), taken)
        taken.add(var)
        groups += [TypeGroup((life,)), ValueGroup((var,), (IfaceT(raised.name, raised.args, life),))]
        raises = raises | EffectSet.of(life)
    return FunDef(fun.name, tuple(groups), fun.result, raises, fun.body, fun.span, fun.implicit)


def fun_interface(fun: FunDef, table: dict) -> tuple:
    """Interface declaration generated for ``fun`` and the arguments of its object.

    The program label may appear only in effect positions; it is abstracted
    into the interface's single effect parameter.
    """
    name = fun.name[:1].upper() + fun.name[1:]
    if name in table:
        raise _error("StructureMismatch", f"function {fun.name} clashes with interface {name}", fun.span)
    sig = build_sig(fun.groups, Result(fun.result, fun.raises))
    if _labels_in_lifetimes(sig):
        raise _error("StructureMismatch", f"function {fun.name} names a label as a lifetime", fun.span,
                     "functions may mention L0 only inside effect sets")
    labels = _labels_in_effects(sig)
    if labels - {PROGRAM_LABEL}:
        raise _error("StructureMismatch", f"function {fun.name} names a region label", fun.span)
    if not labels:
        return InterfaceDecl(name, (), sig, fun.span), ()
    param = fresh_name("'a", sig.free) if "'a" in sig.free else "'a"
    sig = Substitution({PROGRAM_LABEL: EffectSet.of(param)}).sig(sig)
    return InterfaceDecl(name, (param,), sig, fun.span), (EffectSet.of(PROGRAM_LABEL),)


# ---------- scopes ----------

@dataclass(frozen=True)
class Binding:
    name: str
    iface: object = None
    life: object = None


@dataclass(frozen=True)
class ScopeTable:
    """Lexical stack of bindings, innermost last, plus the interface table."""
    bindings: tuple = ()
    table: dict = field(default_factory=dict)

    def push(self, *bindings) -> "ScopeTable":
        return ScopeTable(self.bindings + tuple(bindings), self.table)

    def op_name(self, iface):
        decl = self.table.get(iface)
        return decl.op if decl is not None else None

    def visible(self):
        seen = set()
        for b in reversed(self.bindings):
            if b.name in seen:
                continue
            seen.add(b.name)
            yield b

    def resolve(self, op: str):
        for b in self.visible():
            if b.iface is not None and self.op_name(b.iface) == op:
                return b
        return None

    def handler_for(self, iface: str):
        for b in self.visible():
            if b.iface == iface:
                return b
        return None


class _Decl:
    """Interface table entry: the core declaration plus its operation name."""

    def __init__(self, decl: InterfaceDecl, op: str, implicit: tuple = ()):
        self.decl = decl
        self.op = op
        self.implicit = implicit
        self.name = decl.name
        self.params = decl.params
        self.sig = decl.sig


def _binder_bindings(groups, sig, span):
    """Bindings introduced by an operation implementation's parameters."""
    out, renames = [], {}
    for group in groups:
        names = group.names
        for name in names:
            if isinstance(group, TypeGroup):
                if not isinstance(sig, ForallEff if is_effect_var(name) else ForallLife):
                    raise _error("StructureMismatch", f"parameter {name} does not match the signature", span)
                renames[sig.var] = name
            else:
                if not isinstance(sig, Arrow):
                    raise _error("StructureMismatch", f"parameter {name} does not match the signature", span)
                if isinstance(sig.param, IfaceT):
                    out.append(Binding(name, sig.param.name, renames.get(sig.param.life, sig.param.life)))
                else:
                    out.append(Binding(name))
            sig = sig.body
    if not isinstance(sig, Result):
        raise _error("StructureMismatch", "handler takes fewer parameters than its signature", span)
    return out


def _param_bindings(groups):
    out = []
    for group in groups:
        if isinstance(group, ValueGroup):
            for name, ty in zip(group.names, group.types):
                if isinstance(ty, IfaceT):
                    out.append(Binding(name, ty.name, ty.life))
                else:
                    out.append(Binding(name))
    return out


# ---------- resolution ----------

def resolve_handlers(ast, scope: ScopeTable):
    """Make every elided handler reference explicit (innermost binding wins)."""
    if isinstance(ast, Invoke):
        groups = tuple(_resolve_group(g, scope) for g in ast.groups)
        if ast.handler is not None:
            return Invoke(ast.handler, ast.op, groups, ast.span)
        binding = scope.resolve(ast.op)
        if binding is None:
            raise _error("UnresolvedHandler", f"no handler for {ast.op} is in scope", ast.span)
        decl = scope.table.get(binding.iface)
        if decl is not None and decl.implicit:
            groups += _implicit_args(decl.implicit, scope, ast.span)
        return Invoke(binding.name, ast.op, groups, ast.span)
    if isinstance(ast, TryWith):
        handlers = []
        for h in ast.handlers:
            decl = scope.table.get(h.iface)
            if decl is None:
                raise _error("StructureMismatch", f"unknown interface {h.iface}", h.span)
            inner = scope.push(*_binder_bindings(h.groups, decl.sig, h.span),
                               Binding(SELF, h.iface, HandlerLife(h.name)))
            handlers.append(HandlerDef(h.name, h.iface, h.args, h.op, h.groups,
                                       resolve_handlers(h.body, inner), h.span))
            scope = scope.push(Binding(h.name, h.iface, HandlerLife(h.name)))
        return TryWith(resolve_handlers(ast.body, scope), tuple(handlers), ast.span)
    if isinstance(ast, Resume):
        return Resume(resolve_handlers(ast.body, scope), ast.span)
    if isinstance(ast, SLet):
        return SLet(ast.var, resolve_handlers(ast.bound, scope),
                    resolve_handlers(ast.body, scope.push(Binding(ast.var))), ast.span)
    if isinstance(ast, Seq):
        return Seq(resolve_handlers(ast.first, scope), resolve_handlers(ast.rest, scope), ast.span)
    if isinstance(ast, SRegion):
        return SRegion(ast.label, resolve_handlers(ast.body, scope), ast.span)
    return ast


def _implicit_args(raised, scope: ScopeTable, span) -> tuple:
    """Lifetime and handler arguments for the interfaces a called function raises."""
    out = []
    for r in raised:
        b = scope.handler_for(r.name)
        if b is None or b.life is None:
            raise _error("UnresolvedHandler", f"no {r.name} handler is in scope", span)
        out += [TypeArgs((b.life,)), ValueArgs((VarRef(b.name, span),))]
    return tuple(out)


def _resolve_group(group, scope):
    if isinstance(group, ValueArgs):
        return ValueArgs(tuple(resolve_handlers(a, scope) for a in group.args))
    return group


def surface_scope(program: SurfaceProgram):
    """Interface table (declared, builtin and generated) and function metadata."""
    table = {name: _Decl(decl, BUILTIN_OPS[name]) for name, decl in BUILTIN_INTERFACES.items()}
    for d in program.interfaces:
        if d.name in table:
            raise _error("StructureMismatch", f"interface {d.name} is declared twice", d.span)
        sig = build_sig(d.groups, Result(d.result, d.raises))
        table[d.name] = _Decl(InterfaceDecl(d.name, d.params, sig, d.span), d.op)
    funs = []
    for f in map(expand_raises, program.funs):
        decl, args = fun_interface(f, table)
        table[decl.name] = _Decl(decl, f.name, f.implicit)
        funs.append((f, decl, args))
    return table, funs


def resolve_program(program: SurfaceProgram) -> SurfaceProgram:
    table, funs = surface_scope(program)
    scope = ScopeTable((), table)
    decls = list(program.interfaces)
    for f, decl, _ in funs:
        inner = scope.push(Binding(f.name, decl.name, PROGRAM_LABEL), *_param_bindings(f.groups))
        body = resolve_handlers(f.body, inner)
        decls.append(FunDef(f.name, f.groups, f.result, f.raises, body, f.span, f.implicit))
        scope = scope.push(Binding(f.name, decl.name, PROGRAM_LABEL))
    return SurfaceProgram(tuple(decls), resolve_handlers(program.body, scope))


# ---------- desugaring ----------

class Desugarer:
    def __init__(self, table: dict, first_label: int):
        self.table = table
        self.next_label = first_label

    def fresh_label(self) -> int:
        label = self.next_label
        self.next_label += 1
        return label

    def expr(self, e, labels: dict, handler: bool):
        if isinstance(e, UnitLit):
            return UNIT_VAL
        if isinstance(e, VarRef):
            return Var(e.name, e.span)
        if isinstance(e, SelfRef):
            if not handler:
                raise _error("StructureMismatch", "self outside a handler body", e.span)
            return Var(SELF, e.span)
        if isinstance(e, NatLit):
            return Numeral(e.n, PROGRAM_LABEL, e.span)
        if isinstance(e, OutEmit):
            return emit(e.token, PROGRAM_LABEL, e.span)
        if isinstance(e, SLet):
            return Let(e.var, self.expr(e.bound, labels, handler), self.expr(e.body, labels, handler), e.span)
        if isinstance(e, Seq):
            rest = self.expr(e.rest, labels, handler)
            return Let(_unused("_", set(rest.free)), self.expr(e.first, labels, handler), rest, e.span)
        if isinstance(e, SRegion):
            return RegionNew(e.label, self.expr(e.body, labels, handler), e.span)
        if isinstance(e, Resume):
            if not handler:
                raise _error("StructureMismatch", "resume outside a handler body", e.span)
            return Throw(Var(RESUME), self.expr(e.body, labels, handler), e.span)
        if isinstance(e, Invoke):
            return self.invoke(e, labels, handler)
        if isinstance(e, TryWith):
            return self.try_with(e, labels, handler)
        raise _error("StructureMismatch", f"not an expression: {e!r}")

    def invoke(self, e: Invoke, labels, handler):
        if e.handler is None:
            raise _error("UnresolvedHandler", f"unresolved call to {e.op}", e.span)
        t = Unroll(Var(e.handler, e.span), e.span)
        for group in e.groups:
            if isinstance(group, TypeArgs):
                for arg in group.args:
                    if isinstance(arg, SetArg) or is_effect_var(arg):
                        t = EApp(t, self.effects(arg, labels, e.span), e.span)
                    else:
                        t = LApp(t, self.life(arg, labels, e.span), e.span)
            else:
                for arg in group.args:
                    t = App(t, self.expr(arg, labels, handler), e.span)
        return Up(t, e.span)

    def life(self, arg, labels, span):
        if isinstance(arg, HandlerLife):
            if arg.name not in labels:
                raise _error("UnresolvedHandler", f"@{arg.name} does not name a handler binding", span)
            return labels[arg.name]
        return arg

    def effects(self, arg, labels, span) -> EffectSet:
        atoms = arg if isinstance(arg, SetArg) else (arg,)
        return EffectSet(tuple(self.life(a, labels, span) for a in atoms))

    def opbody(self, groups, sig, body, span):
        """Binder chain for an implementation, checked against ``sig``."""
        names = []
        for group in groups:
            for name in group.names:
                if isinstance(group, TypeGroup):
                    want = ForallEff if is_effect_var(name) else ForallLife
                    if not isinstance(sig, want):
                        raise _error("StructureMismatch", f"parameter {name} does not match the signature",
                                     span, f"expected {type(sig).__name__}")
                    names.append((ELam if want is ForallEff else LLam, name))
                else:
                    if not isinstance(sig, Arrow):
                        raise _error("StructureMismatch", f"parameter {name} does not match the signature",
                                     span, f"expected {type(sig).__name__}")
                    names.append((VLam, name))
                sig = sig.body
        if not isinstance(sig, Result):
            raise _error("StructureMismatch", "handler takes fewer parameters than its signature", span)
        m = KLam(RESUME, body)
        for cls, name in reversed(names):
            m = cls(name, m)
        return m

    def try_with(self, e: TryWith, labels, handler):
        label = self.fresh_label()
        labels = dict(labels)
        bound = []
        for h in e.handlers:
            decl = self.table.get(h.iface)
            if decl is None:
                raise _error("StructureMismatch", f"unknown interface {h.iface}", h.span)
            if decl.op != h.op:
                raise _error("StructureMismatch", f"interface {h.iface} has no operation {h.op}", h.span,
                             f"its operation is {decl.op}")
            args = tuple(self.effects(a, labels, h.span) for a in h.args)
            labels[h.name] = label
            body = self.expr(h.body, labels, True)
            m = self.opbody(h.groups, decl.sig, body, h.span)
            bound.append((h.name, Fix(SELF, m, label, h.iface, args, None, h.span)))
        out = self.expr(e.body, labels, handler)
        for name, fix in reversed(bound):
            out = Let(name, fix, out, e.span)
        return RegionNew(label, out, e.span)

    def fun(self, f: FunDef, decl: InterfaceDecl, args):
        body = Throw(Var(RESUME), self.expr(f.body, {}, False), f.span)
        m = self.opbody(f.groups, decl.sig, body, f.span)
        return Fix(f.name, m, PROGRAM_LABEL, decl.name, args, None, f.span)


def _max_label(node) -> int:
    best = PROGRAM_LABEL
    todo = [node]
    while todo:
        n = todo.pop()
        if isinstance(n, SRegion):
            best = max(best, n.label)
        if isinstance(n, tuple):
            todo.extend(n)
        elif hasattr(n, "__dataclass_fields__"):
            todo.extend(getattr(n, k) for k in n.__dataclass_fields__ if k != "span")
    return best


def desugar(program: SurfaceProgram) -> Program:
    """Core program for ``program``; handlers are resolved first."""
    table, funs = surface_scope(program)
    program = resolve_program(program)
    bodies = {f.name: f for f in program.funs}
    d = Desugarer(table, _max_label(program) + 1)
    fixes = [(f.name, d.fun(bodies[f.name], decl, args)) for f, decl, args in funs]
    body = d.expr(program.body, {}, False)
    for name, fix in reversed(fixes):
        body = Let(name, fix, body)
    declared = tuple(table[i.name].decl for i in program.interfaces)
    generated = tuple(decl for _, decl, _ in funs)
    log.info("desugared %d functions and %d regions", len(funs), d.next_label - 1)
    return Program(declared + generated, PROGRAM_LABEL, body)


def desugar_source(text: str) -> Program:
    return desugar(parse_surface(text))
