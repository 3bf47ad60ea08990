"""Lark grammar and transformer for ``.olaf`` core programs."""
import logging
from typing import NamedTuple

import lark as L
from lark import v_args

from utils.diagnostics import ParseError
from core.syntax import emit as make_emit
from core.syntax import (
    App, Arrow, ContT, EApp, ELam, EffectSet, Fix, ForallEff, ForallLife,
    IfaceT, InterfaceDecl, KLam, LApp, LLam, Let, Numeral, OpT, OpVal, Program,
    RegionNew, Result, Throw, UNIT, UnitVal, Unroll, Up, Var, VLam,
)

log = logging.getLogger(__name__)

GRAMMAR = r"""
    start: decl* "region" LABEL "{" term "}"

    decl: "interface" NAME params? home? "=" sig ";"
    home: "@" LVAR
    params: "[" EVAR ("," EVAR)* "]"

    ?sig: "forall" EVAR "." sig          -> forall_eff
        | "forall" LVAR "." sig          -> forall_life
        | ty "->" sig                    -> arrow
        | ty "!" effset                  -> result

    ?ty: "Unit"                                          -> unit_ty
       | NAME effargs? "@" life                          -> iface_ty
       | "op" "(" sig ")" "@" life                       -> op_ty
       | "cont" "(" ty "!" effset "=>" ty "!" effset ")" -> cont_ty

    effargs: "[" effarg ("," effarg)* "]"
    ?effarg: effset
           | EVAR   -> single
           | LVAR   -> single
           | LABEL  -> single
    effset: "{" [atom ("," atom)*] "}"
    ?atom: EVAR | LVAR | LABEL
    ?life: LVAR | LABEL

    ?term: "let" NAME "=" term "in" term   -> let
         | "raise" term                    -> up
         | "unroll" term                   -> unroll
         | postfix

    ?postfix: atom_term
            | postfix "(" term ")"          -> app
            | postfix "[" effset "]"        -> eapp
            | postfix "[" EVAR "]"          -> eapp_single
            | postfix "[" life "]"          -> lapp

    ?atom_term: NAME                                          -> var
              | "unit"                                        -> unit
              | "(" term ")"
              | "nat" SIGNED_INT "@" life                            -> nat
              | "emit" (NAME | SIGNED_INT) "@" life           -> emit
              | "fix" NAME ":" NAME effargs? "@" life tag? "{" opbody "}"  -> fix
              | "op" "<" sig ">" "@" life tag? "{" opbody "}"              -> opval
              | "region" LABEL "{" term "}"                   -> region
              | "throw" "(" term "," term ")"                 -> throw
              | "reset" LABEL "{" term "}"                    -> runtime_only
              | "cont" "<" ty "!" effset ">" "{" term "}"    -> runtime_only
              | "[" "]"                                       -> runtime_only

    tag: "tag" NAME

    ?opbody: "\\" EVAR "." opbody      -> elam
           | "\\" LVAR "." opbody      -> llam
           | "\\" NAME "." opbody      -> vlam
           | "\\" NAME "=>" term       -> klam

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


class Tag(NamedTuple):
    name: str


class Home(NamedTuple):
    name: str


def label_of(token) -> int:
    return int(str(token)[1:])


def atom_of(token):
    text = str(token)
    if token.type == "LABEL":
        return label_of(token)
    return text


def _span(meta):
    if meta is None or getattr(meta, "empty", True):
        return None
    return (meta.line, meta.column)


@v_args(meta=True)
class CoreTransformer(L.Transformer):
    """Builds core syntax from the parse tree, keeping line/column spans."""

    def start(self, meta, children):
        *decls, label, body = children
        return Program(tuple(decls), label_of(label), body)

    def decl(self, meta, children):
        name, *rest = children
        sig = rest.pop()
        home = rest.pop().name if rest and isinstance(rest[-1], Home) else None
        params = rest[0] if rest else ()
        return InterfaceDecl(str(name), params, sig, _span(meta), home)

    def params(self, meta, children):
        return tuple(str(c) for c in children)

    def home(self, meta, children):
        return Home(str(children[0]))

    # signatures and types
    def forall_eff(self, meta, children):
        return ForallEff(str(children[0]), children[1])

    def forall_life(self, meta, children):
        return ForallLife(str(children[0]), children[1])

    def arrow(self, meta, children):
        return Arrow(children[0], children[1])

    def result(self, meta, children):
        return Result(children[0], children[1])

    def unit_ty(self, meta, children):
        return UNIT

    def iface_ty(self, meta, children):
        if len(children) == 3:
            return IfaceT(str(children[0]), children[1], atom_of(children[2]))
        return IfaceT(str(children[0]), (), atom_of(children[1]))

    def op_ty(self, meta, children):
        return OpT(children[0], atom_of(children[1]))

    def cont_ty(self, meta, children):
        return ContT(*children)

    def effargs(self, meta, children):
        return tuple(children)

    def single(self, meta, children):
        return EffectSet.of(atom_of(children[0]))

    def effset(self, meta, children):
        return EffectSet(tuple(atom_of(c) for c in children if c is not None))

    # terms
    def let(self, meta, children):
        return Let(str(children[0]), children[1], children[2], _span(meta))

    def up(self, meta, children):
        return Up(children[0], _span(meta))

    def unroll(self, meta, children):
        return Unroll(children[0], _span(meta))

    def app(self, meta, children):
        return App(children[0], children[1], _span(meta))

    def eapp(self, meta, children):
        return EApp(children[0], children[1], _span(meta))

    def eapp_single(self, meta, children):
        return EApp(children[0], EffectSet.of(str(children[1])), _span(meta))

    def lapp(self, meta, children):
        return LApp(children[0], atom_of(children[1]), _span(meta))

    def var(self, meta, children):
        return Var(str(children[0]), _span(meta))

    def unit(self, meta, children):
        return UnitVal(_span(meta))

    def nat(self, meta, children):
        n = int(children[0])
        if n < 0:
            raise ParseError("numerals are natural numbers", span=_span(meta))
        return Numeral(n, atom_of(children[1]), _span(meta))

    def emit(self, meta, children):
        return make_emit(str(children[0]), atom_of(children[1]), _span(meta))

    def tag(self, meta, children):
        return Tag(str(children[0]))

    def fix(self, meta, children):
        self_var, iface, *rest = children
        body = rest.pop()
        tag = rest.pop().name if isinstance(rest[-1], Tag) else None
        life = atom_of(rest.pop())
        args = rest.pop() if rest else ()
        return Fix(str(self_var), body, life, str(iface), args, tag, _span(meta))

    def opval(self, meta, children):
        sig, life, *rest = children
        body = rest.pop()
        tag = rest[0].name if rest else None
        return OpVal(body, atom_of(life), sig, tag, _span(meta))

    def region(self, meta, children):
        return RegionNew(label_of(children[0]), children[1], _span(meta))

    def throw(self, meta, children):
        return Throw(children[0], children[1], _span(meta))

    def runtime_only(self, meta, children):
        raise ParseError("runtime-only form", span=_span(meta),
                         detail="reset and cont terms only arise during evaluation")

    # operation bodies
    def elam(self, meta, children):
        return ELam(str(children[0]), children[1])

    def llam(self, meta, children):
        return LLam(str(children[0]), children[1])

    def vlam(self, meta, children):
        return VLam(str(children[0]), children[1])

    def klam(self, meta, children):
        return KLam(str(children[0]), children[1])


_parser = L.Lark(GRAMMAR, start="start", parser="lalr", propagate_positions=True,
                 maybe_placeholders=False)


def parse_tree(text: str):
    try:
        return _parser.parse(text)
    except L.exceptions.UnexpectedInput as exc:
        raise ParseError.from_lark(exc, text) from exc


def parse_program(text: str) -> Program:
    tree = parse_tree(text)
    try:
        program = CoreTransformer().transform(tree)
    except L.exceptions.VisitError as exc:
        if isinstance(exc.orig_exc, ParseError):
            raise exc.orig_exc from None
        raise
    log.debug("parsed program with %d interfaces", len(program.interfaces))
    return program


def parse_term(text: str):
    """Parse a bare term by wrapping it in a throwaway top region."""
    return parse_program(f"region L0 {{ {text} }}").body
