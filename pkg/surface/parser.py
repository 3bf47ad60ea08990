"""Lark grammar and transformer for ``.bdl`` surface programs."""
import logging
from typing import NamedTuple

import lark as L
from lark import v_args

from utils.diagnostics import ParseError
from core.parser import CoreTransformer, _span, atom_of, label_of
from core.syntax import EffectSet
from surface.syntax import (
    FunDef, HandlerDef, HandlerLife, InterfaceDef, Invoke, NatLit, OutEmit,
    RaisedIface, Resume, SLet, SRegion, SelfRef, Seq, SurfaceProgram, TryWith, TypeArgs,
    TypeGroup, UnitLit, ValueArgs, ValueGroup, VarRef,
)

log = logging.getLogger(__name__)

GRAMMAR = r"""
    start: decl* expr

    ?decl: "interface" NAME params? "{" opdecl* "}"                     -> interface
         | "fun" NAME group* ":" ty "raises" fun_raises "{" expr "}"   -> fun
    params: "[" EVAR ("," EVAR)* "]"
    opdecl: NAME group* ":" ty "raises" effset
    fun_raises: "{" [raised ("," raised)*] "}"
    ?raised: atom
           | NAME effargs?                       -> raised_iface

    ?group: "[" tparam ("," tparam)* "]"          -> tgroup
          | "(" [param ("," param)*] ")"          -> vgroup
    ?tparam: EVAR | LVAR
    param: NAME ":" ty

    ?ty: "Unit"                                  -> unit_ty
       | NAME effargs? "@" life                  -> iface_ty
    effargs: "[" effarg ("," effarg)* "]"
    ?effarg: effset
           | EVAR   -> single
           | LVAR   -> single
           | LABEL  -> single
    effset: "{" [atom ("," atom)*] "}"
    ?atom: EVAR | LVAR | LABEL
    ?life: LVAR | LABEL

    ?expr: stmt
         | stmt (";" stmt)+                      -> seq
    ?stmt: "let" NAME "=" stmt "in" expr         -> let
         | "try" "{" expr "}" handler+           -> try_with
         | "resume" "{" expr? "}"                -> resume
         | "region" LABEL "{" expr "}"           -> region
         | call
    ?call: simple
         | NAME "." NAME arggroup+               -> invoke
         | NAME arggroup+                        -> call
    ?simple: "unit"                              -> unit
           | "(" ")"                             -> unit
           | "(" expr ")"
           | NAME                                -> var
           | "self"                              -> self_ref
           | "nat" SIGNED_INT                    -> nat
           | "emit" (NAME | SIGNED_INT)          -> emit

    handler: "with" NAME ":" NAME handler_args? "=" "{" NAME binders* "{" expr "}" "}"
    handler_args: "[" targ ("," targ)* "]"
    ?binders: "[" tparam ("," tparam)* "]"       -> tbinders
            | "(" [NAME ("," NAME)*] ")"         -> vbinders

    ?arggroup: "[" targ ("," targ)* "]"          -> targs
             | "(" [expr ("," expr)*] ")"        -> vargs
    ?targ: "{" [targ_atom ("," targ_atom)*] "}"  -> targ_set
         | targ_atom
    ?targ_atom: EVAR | LVAR | LABEL
              | "@" NAME                         -> at_handler

    LABEL.2: /L[0-9]+(?![A-Za-z0-9_])/
    EVAR: /'[A-Za-z_][A-Za-z0-9_]*/
    LVAR: /\^[A-Za-z_][A-Za-z0-9_]*/
    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    COMMENT: /\/\/[^\n]*/

    %import common.SIGNED_INT
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""


def _targ_atom(item):
    if isinstance(item, HandlerLife):
        return item
    return atom_of(item)


class SetArg(tuple):
    """A braced argument ``{..}``: always an effect argument."""


def _call_arg(item):
    return item if isinstance(item, SetArg) else _targ_atom(item)


@v_args(meta=True)
class SurfaceTransformer(CoreTransformer):
    """Builds surface nodes; types reuse the core transformer's rules."""

    def start(self, meta, children):
        *decls, body = children
        return SurfaceProgram(tuple(decls), body)

    def interface(self, meta, children):
        name, *rest = children
        params = rest.pop(0) if rest and isinstance(rest[0], tuple) and not isinstance(rest[0], _OpDecl) else ()
        ops = [r for r in rest if isinstance(r, _OpDecl)]
        if len(ops) != 1:
            raise ParseError("one operation per interface", span=_span(meta),
                             detail=f"interface {name} declares {len(ops)}")
        op = ops[0]
        return InterfaceDef(str(name), params, op.name, op.groups, op.result, op.raises, _span(meta))

    def opdecl(self, meta, children):
        name, *groups, result, raises = children
        return _OpDecl(str(name), tuple(groups), result, raises)

    def fun(self, meta, children):
        name, *groups, result, raises, body = children
        return FunDef(str(name), tuple(groups), result, raises.effects, body, _span(meta), raises.ifaces)

    def fun_raises(self, meta, children):
        atoms = [atom_of(c) for c in children if c is not None and not isinstance(c, RaisedIface)]
        return _Raises(EffectSet(tuple(atoms)), tuple(c for c in children if isinstance(c, RaisedIface)))

    def raised_iface(self, meta, children):
        return RaisedIface(str(children[0]), children[1] if len(children) > 1 else ())

    def tgroup(self, meta, children):
        return TypeGroup(tuple(str(c) for c in children))

    def vgroup(self, meta, children):
        params = [c for c in children if c is not None]
        return ValueGroup(tuple(p[0] for p in params), tuple(p[1] for p in params))

    def param(self, meta, children):
        return (str(children[0]), children[1])

    # expressions
    def seq(self, meta, children):
        out = children[-1]
        for first in reversed(children[:-1]):
            out = Seq(first, out, _span(meta))
        return out

    def let(self, meta, children):
        return SLet(str(children[0]), children[1], children[2], _span(meta))

    def try_with(self, meta, children):
        body, *handlers = children
        return TryWith(body, tuple(handlers), _span(meta))

    def resume(self, meta, children):
        return Resume(children[0] if children else UnitLit(_span(meta)), _span(meta))

    def region(self, meta, children):
        return SRegion(label_of(children[0]), children[1], _span(meta))

    def invoke(self, meta, children):
        handler, op, *groups = children
        return Invoke(str(handler), str(op), tuple(groups), _span(meta))

    def call(self, meta, children):
        op, *groups = children
        return Invoke(None, str(op), tuple(groups), _span(meta))

    def unit(self, meta, children):
        return UnitLit(_span(meta))

    def var(self, meta, children):
        return VarRef(str(children[0]), _span(meta))

    def self_ref(self, meta, children):
        return SelfRef(_span(meta))

    def nat(self, meta, children):
        n = int(children[0])
        if n < 0:
            raise ParseError("numerals are natural numbers", span=_span(meta))
        return NatLit(n, _span(meta))

    def emit(self, meta, children):
        return OutEmit(str(children[0]), _span(meta))

    # handlers and call arguments
    def handler(self, meta, children):
        name, iface, *rest = children
        args = rest.pop(0) if rest and isinstance(rest[0], _HandlerArgs) else ()
        op, *binders, body = rest
        return HandlerDef(str(name), str(iface), tuple(args), str(op), tuple(binders), body, _span(meta))

    def handler_args(self, meta, children):
        return _HandlerArgs(_call_arg(c) for c in children)

    def tbinders(self, meta, children):
        return TypeGroup(tuple(str(c) for c in children))

    def vbinders(self, meta, children):
        return ValueGroup(tuple(str(c) for c in children if c is not None))

    def targs(self, meta, children):
        return TypeArgs(tuple(_call_arg(c) for c in children))

    def vargs(self, meta, children):
        return ValueArgs(tuple(c for c in children if c is not None))

    def targ_set(self, meta, children):
        return SetArg(_targ_atom(c) for c in children if c is not None)

    def at_handler(self, meta, children):
        return HandlerLife(str(children[0]))


class _OpDecl(tuple):
    def __new__(cls, name, groups, result, raises):
        return super().__new__(cls, (name, groups, result, raises))

    name = property(lambda self: self[0])
    groups = property(lambda self: self[1])
    result = property(lambda self: self[2])
    raises = property(lambda self: self[3])


class _HandlerArgs(tuple):
    pass


class _Raises(NamedTuple):
    effects: EffectSet
    ifaces: tuple


_parser = L.Lark(GRAMMAR, start="start", parser="lalr", propagate_positions=True,
                 maybe_placeholders=False)


def parse_surface(text: str) -> SurfaceProgram:
    try:
        tree = _parser.parse(text)
    except L.exceptions.UnexpectedInput as exc:
        raise ParseError.from_lark(exc, text) from exc
    try:
        program = SurfaceTransformer().transform(tree)
    except L.exceptions.VisitError as exc:
        if isinstance(exc.orig_exc, ParseError):
            raise exc.orig_exc from None
        raise
    log.debug("parsed surface program with %d declarations", len(program.decls))
    return program

