"""Abstract syntax of the core effect language.

Names carry their sort in a sigil so a single free-name set covers every
sort: term variables are bare identifiers (``x``), effect variables start
with a quote (``'a``), lifetime variables with a caret (``^p``) and
lifetime labels are plain ints.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

Lifetime = Union[str, int]
Atom = Union[str, int]
Span = Optional[Tuple[int, int]]

NO_FREE = frozenset()


def is_effect_var(name) -> bool:
    return isinstance(name, str) and name.startswith("'")


def is_life_var(name) -> bool:
    return isinstance(name, str) and name.startswith("^")


def is_label(name) -> bool:
    return isinstance(name, int)


def _atom_key(atom: Atom):
    if isinstance(atom, int):
        return (0, atom, "")
    return (1, 0, atom)


def _union(*sets) -> frozenset:
    out = NO_FREE
    for s in sets:
        if s:
            out = out | s
    return out


# ---------- effects ----------

@dataclass(frozen=True, slots=True)
class EffectSet:
    """A finite set of atomic effects, kept sorted and deduplicated."""
    items: Tuple[Atom, ...] = ()
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        unique = frozenset(self.items)
        object.__setattr__(self, "items", tuple(sorted(unique, key=_atom_key)))
        object.__setattr__(self, "free", unique)

    @classmethod
    def of(cls, *atoms: Atom) -> "EffectSet":
        return cls(tuple(atoms))

    def __or__(self, other: "EffectSet") -> "EffectSet":
        if not other.items or other.free <= self.free:
            return self
        if not self.items:
            return other
        return EffectSet(self.items + other.items)

    def __sub__(self, other) -> "EffectSet":
        drop = other.free if isinstance(other, EffectSet) else frozenset(other)
        if self.free.isdisjoint(drop):
            return self
        return EffectSet(tuple(a for a in self.items if a not in drop))

    def __contains__(self, atom) -> bool:
        return atom in self.free

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def issubset(self, other: "EffectSet") -> bool:
        return self.free <= other.free


EMPTY = EffectSet()


# ---------- types and signatures ----------

@dataclass(frozen=True, slots=True)
class UnitT:
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)


@dataclass(frozen=True, slots=True)
class IfaceT:
    name: str
    args: Tuple[EffectSet, ...]
    life: Lifetime
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", _union(frozenset([self.life]), *(a.free for a in self.args)))


@dataclass(frozen=True, slots=True)
class OpT:
    sig: "Signature"
    life: Lifetime
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.sig.free | {self.life})


@dataclass(frozen=True, slots=True)
class ContT:
    src: "TypeExpr"
    src_eff: EffectSet
    dst: "TypeExpr"
    dst_eff: EffectSet
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", _union(self.src.free, self.src_eff.free, self.dst.free, self.dst_eff.free))


TypeExpr = Union[UnitT, IfaceT, OpT, ContT]
UNIT = UnitT()


@dataclass(frozen=True, slots=True)
class ForallEff:
    var: str
    body: "Signature"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.var})


@dataclass(frozen=True, slots=True)
class ForallLife:
    var: str
    body: "Signature"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.var})


@dataclass(frozen=True, slots=True)
class Arrow:
    param: TypeExpr
    body: "Signature"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.param.free | self.body.free)


@dataclass(frozen=True, slots=True)
class Result:
    ty: TypeExpr
    eff: EffectSet
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.ty.free | self.eff.free)


Signature = Union[ForallEff, ForallLife, Arrow, Result]


# ---------- operation bodies ----------

@dataclass(frozen=True, slots=True)
class ELam:
    var: str
    body: "OpBody"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.var})


@dataclass(frozen=True, slots=True)
class LLam:
    var: str
    body: "OpBody"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.var})


@dataclass(frozen=True, slots=True)
class VLam:
    var: str
    body: "OpBody"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.var})


@dataclass(frozen=True, slots=True)
class KLam:
    var: str
    body: "Term"
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.var})


OpBody = Union[ELam, LLam, VLam, KLam]


# ---------- terms ----------

@dataclass(frozen=True, slots=True)
class Var:
    name: str
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", frozenset([self.name]))


@dataclass(frozen=True, slots=True)
class UnitVal:
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)


@dataclass(frozen=True, slots=True)
class Fix:
    """A handler object: ``fix self : iface[args] @ life { body }``.

    ``tag`` marks the builtin output handler; the machine records it as a
    token when the operation is dispatched.
    """
    self_var: str
    body: OpBody
    life: Lifetime
    iface: str
    args: Tuple[EffectSet, ...] = ()
    tag: Optional[str] = None
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", _union(self.body.free - {self.self_var}, frozenset([self.life]),
                                                *(a.free for a in self.args)))


@dataclass(frozen=True, slots=True)
class OpVal:
    """An exposed operation implementation at a lifetime.

    ``sig`` is the signature still expected by ``body``; it is filled in by
    the machine and by source ``op`` literals.
    """
    body: OpBody
    life: Lifetime
    sig: Optional[Signature] = None
    tag: Optional[str] = None
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        free = self.body.free | {self.life}
        if self.sig is not None:
            free = free | self.sig.free
        object.__setattr__(self, "free", free)


@dataclass(frozen=True, slots=True)
class Numeral:
    """A unary natural number, an object of interface ``Nat``."""
    n: int
    life: Lifetime
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", frozenset([self.life]))


@dataclass(frozen=True, slots=True)
class Cont:
    """A captured delimited context, outermost frame first.

    ``src``/``src_eff`` type the hole. Captured frames are closed runtime
    syntax, so substitution never enters a continuation.
    """
    frames: tuple
    src: TypeExpr
    src_eff: EffectSet
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)


@dataclass(frozen=True, slots=True)
class Unroll:
    term: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.term.free)


@dataclass(frozen=True, slots=True)
class EApp:
    term: "Term"
    eff: EffectSet
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.term.free | self.eff.free)


@dataclass(frozen=True, slots=True)
class LApp:
    term: "Term"
    life: Lifetime
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.term.free | {self.life})


@dataclass(frozen=True, slots=True)
class App:
    fn: "Term"
    arg: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.fn.free | self.arg.free)


@dataclass(frozen=True, slots=True)
class RegionNew:
    label: int
    body: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free - {self.label})


@dataclass(frozen=True, slots=True)
class Up:
    term: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.term.free)


@dataclass(frozen=True, slots=True)
class Let:
    var: str
    bound: "Term"
    body: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.bound.free | (self.body.free - {self.var}))


@dataclass(frozen=True, slots=True)
class Throw:
    cont: "Term"
    arg: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.cont.free | self.arg.free)


@dataclass(frozen=True, slots=True)
class Reset:
    label: int
    body: "Term"
    span: Span = field(default=None, compare=False, repr=False)
    free: frozenset = field(default=NO_FREE, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "free", self.body.free | {self.label})


Term = Union[Var, UnitVal, Fix, OpVal, Numeral, Cont, Unroll, EApp, LApp, App,
             RegionNew, Up, Let, Throw, Reset]
VALUE_TYPES = (Var, UnitVal, Fix, OpVal, Numeral, Cont)
UNIT_VAL = UnitVal()


def is_value(t) -> bool:
    return isinstance(t, VALUE_TYPES)


# ---------- evaluation-context frames ----------
# A context is a tuple of frames, outermost first; HOLE is the empty tuple.

@dataclass(frozen=True, slots=True)
class UnrollK:
    pass


@dataclass(frozen=True, slots=True)
class EAppK:
    eff: EffectSet


@dataclass(frozen=True, slots=True)
class LAppK:
    life: Lifetime


@dataclass(frozen=True, slots=True)
class AppFunK:
    arg: Term


@dataclass(frozen=True, slots=True)
class AppArgK:
    fn: Term


@dataclass(frozen=True, slots=True)
class UpK:
    pass


@dataclass(frozen=True, slots=True)
class LetK:
    var: str
    body: Term


@dataclass(frozen=True, slots=True)
class ThrowK:
    arg: Term


@dataclass(frozen=True, slots=True)
class ResetK:
    label: int


Frame = Union[UnrollK, EAppK, LAppK, AppFunK, AppArgK, UpK, LetK, ThrowK, ResetK]
HOLE: tuple = ()
UNROLL_K = UnrollK()
UP_K = UpK()


def fill(frame, t: Term) -> Term:
    """Plug ``t`` into the hole of a single frame."""
    if isinstance(frame, UnrollK):
        return Unroll(t)
    if isinstance(frame, EAppK):
        return EApp(t, frame.eff)
    if isinstance(frame, LAppK):
        return LApp(t, frame.life)
    if isinstance(frame, AppFunK):
        return App(t, frame.arg)
    if isinstance(frame, AppArgK):
        return App(frame.fn, t)
    if isinstance(frame, UpK):
        return Up(t)
    if isinstance(frame, LetK):
        return Let(frame.var, t, frame.body)
    if isinstance(frame, ThrowK):
        return Throw(t, frame.arg)
    if isinstance(frame, ResetK):
        return Reset(frame.label, t)
    raise ValueError(f"not a frame: {frame!r}")


def plug(ctx, t: Term) -> Term:
    for frame in reversed(ctx):
        t = fill(frame, t)
    return t


def decompose(t: Term):
    """Split a term into (context, redex); returns None for values.

    Order is call-by-value, left to right: function before argument, the
    bound term of a let, the continuation operand of a throw.
    """
    if is_value(t):
        return None
    frames = []
    while True:
        if isinstance(t, Unroll) and not is_value(t.term):
            frames.append(UNROLL_K)
            t = t.term
        elif isinstance(t, EApp) and not is_value(t.term):
            frames.append(EAppK(t.eff))
            t = t.term
        elif isinstance(t, LApp) and not is_value(t.term):
            frames.append(LAppK(t.life))
            t = t.term
        elif isinstance(t, App) and not is_value(t.fn):
            frames.append(AppFunK(t.arg))
            t = t.fn
        elif isinstance(t, App) and not is_value(t.arg):
            frames.append(AppArgK(t.fn))
            t = t.arg
        elif isinstance(t, Up) and not is_value(t.term):
            frames.append(UP_K)
            t = t.term
        elif isinstance(t, Let) and not is_value(t.bound):
            frames.append(LetK(t.var, t.body))
            t = t.bound
        elif isinstance(t, Throw) and not is_value(t.cont):
            frames.append(ThrowK(t.arg))
            t = t.cont
        elif isinstance(t, Reset) and not is_value(t.body):
            # delimiters stay in the context, an Up below one is the redex
            frames.append(ResetK(t.label))
            t = t.body
        else:
            return tuple(frames), t


# ---------- interfaces and programs ----------

@dataclass(frozen=True, slots=True)
class InterfaceDecl:
    """``interface I['a..] @ ^h = sig``; ``home`` names the object's own lifetime."""
    name: str
    params: Tuple[str, ...]
    sig: Signature
    span: Span = field(default=None, compare=False, repr=False)
    home: Optional[str] = None


@dataclass(frozen=True, slots=True)
class Program:
    interfaces: Tuple[InterfaceDecl, ...]
    label: int
    body: Term

    @property
    def main(self) -> Term:
        return RegionNew(self.label, self.body)

    def table(self) -> dict:
        out = dict(BUILTIN_INTERFACES)
        out.update({decl.name: decl for decl in self.interfaces})
        return out


def _nat_sig() -> Signature:
    return ForallEff("'e", ForallLife("^s", Arrow(
        IfaceT("Succ", (EffectSet.of("'e"),), "^s"),
        Result(UNIT, EffectSet.of("^s", "'e")))))


def _succ_sig() -> Signature:
    return ForallLife("^r", Arrow(IfaceT("Nat", (), "^r"), Result(UNIT, EffectSet.of("^r", "'e"))))


BUILTIN_INTERFACES = {
    "Out": InterfaceDecl("Out", (), Result(UNIT, EMPTY)),
    "Nat": InterfaceDecl("Nat", (), _nat_sig()),
    "Succ": InterfaceDecl("Succ", ("'e",), _succ_sig()),
}


def numeral_body(n: int, life: Lifetime) -> OpBody:
    """Operation implementation exposed by unrolling ``nat n @ life``."""
    if n == 0:
        resumed: Term = UNIT_VAL
    else:
        resumed = Up(App(LApp(Unroll(Var("h")), life), Numeral(n - 1, life)))
    return ELam("'e", LLam("^s", VLam("h", KLam("k", Throw(Var("k"), resumed)))))


def emit(token: str, life: Lifetime, span: Span = None) -> Term:
    """``emit tok @ life``: raise the builtin output operation."""
    handler = Fix("_out", KLam("k", Throw(Var("k"), UNIT_VAL)), life, "Out", (), tag=token)
    return Up(Unroll(handler), span=span)
