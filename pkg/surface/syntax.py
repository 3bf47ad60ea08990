"""Surface (``.bdl``) syntax tree.

Nodes keep their source span for diagnostics. Types and effect sets reuse
the core representations; ``@H`` lifetime references are kept symbolic as
:class:`HandlerLife` until desugaring assigns region labels.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

Span = Optional[Tuple[int, int]]


@dataclass(frozen=True)
class HandlerLife:
    """``@H``: the region label of handler binding ``H``."""
    name: str


@dataclass(frozen=True)
class TypeGroup:
    """``['x, ^q]`` in a signature or an operation implementation."""
    names: Tuple[str, ...]


@dataclass(frozen=True)
class ValueGroup:
    """``(x: T, ...)`` in a declaration; types are None in implementations."""
    names: Tuple[str, ...]
    types: Tuple[object, ...] = ()


@dataclass(frozen=True)
class RaisedIface:
    """An interface named in a function's ``raises`` clause, e.g. ``Ask[L0]``."""
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class InterfaceDef:
    name: str
    params: Tuple[str, ...]
    op: str
    groups: tuple
    result: object
    raises: tuple
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class FunDef:
    name: str
    groups: tuple
    result: object
    raises: tuple
    body: "Expr"
    span: Span = field(default=None, compare=False)
    implicit: Tuple[RaisedIface, ...] = ()


@dataclass(frozen=True)
class HandlerDef:
    """``with H : I[args] = { op[..](..) { body } }``."""
    name: str
    iface: str
    args: tuple
    op: str
    groups: tuple
    body: "Expr"
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class TryWith:
    body: "Expr"
    handlers: Tuple[HandlerDef, ...]
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class TypeArgs:
    """``[..]`` at a call site: effect sets and lifetimes in order."""
    args: tuple


@dataclass(frozen=True)
class ValueArgs:
    args: tuple


@dataclass(frozen=True)
class Invoke:
    """``H.op[..](..)``; ``handler`` is None until the call is resolved."""
    handler: Optional[str]
    op: str
    groups: tuple
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class Resume:
    body: "Expr"
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class SelfRef:
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class SLet:
    var: str
    bound: "Expr"
    body: "Expr"
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class Seq:
    first: "Expr"
    rest: "Expr"
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class UnitLit:
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class VarRef:
    name: str
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class OutEmit:
    token: str
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class NatLit:
    n: int
    span: Span = field(default=None, compare=False)


@dataclass(frozen=True)
class SRegion:
    label: int
    body: "Expr"
    span: Span = field(default=None, compare=False)


Expr = Union[TryWith, Invoke, Resume, SelfRef, SLet, Seq, UnitLit, VarRef, OutEmit, NatLit, SRegion]


@dataclass(frozen=True)
class SurfaceProgram:
    decls: tuple
    body: Expr

    @property
    def interfaces(self):
        return tuple(d for d in self.decls if isinstance(d, InterfaceDef))

    @property
    def funs(self):
        return tuple(d for d in self.decls if isinstance(d, FunDef))
