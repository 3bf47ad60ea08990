"""Pretty printer for the core concrete syntax.

``parse_program(print_program(p))`` is alpha-equivalent to ``p`` for every
source program; ``reset`` and ``cont`` are printed for runtime terms only.
"""
from core.syntax import (
    App, Arrow, Cont, ContT, EApp, ELam, EffectSet, Fix, ForallEff, ForallLife,
    IfaceT, KLam, LApp, LLam, Let, Numeral, OpT, OpVal, Program, RegionNew,
    Reset, Result, Throw, UnitT, UnitVal, Unroll, Up, Var, VLam, plug,
)


def print_life(life) -> str:
    return f"L{life}" if isinstance(life, int) else life


def print_atom(atom) -> str:
    return print_life(atom)


def print_effects(eff: EffectSet) -> str:
    return "{" + ", ".join(print_atom(a) for a in eff.items) + "}"


def print_type(t) -> str:
    if isinstance(t, UnitT):
        return "Unit"
    if isinstance(t, IfaceT):
        args = f"[{', '.join(print_effects(a) for a in t.args)}]" if t.args else ""
        return f"{t.name}{args} @ {print_life(t.life)}"
    if isinstance(t, OpT):
        return f"op({print_sig(t.sig)}) @ {print_life(t.life)}"
    if isinstance(t, ContT):
        return (f"cont({print_type(t.src)} ! {print_effects(t.src_eff)} => "
                f"{print_type(t.dst)} ! {print_effects(t.dst_eff)})")
    raise ValueError(f"not a type: {t!r}")


def print_sig(s) -> str:
    if isinstance(s, (ForallEff, ForallLife)):
        return f"forall {s.var}. {print_sig(s.body)}"
    if isinstance(s, Arrow):
        return f"{print_type(s.param)} -> {print_sig(s.body)}"
    if isinstance(s, Result):
        return f"{print_type(s.ty)} ! {print_effects(s.eff)}"
    raise ValueError(f"not a signature: {s!r}")


def print_opbody(m) -> str:
    if isinstance(m, KLam):
        return f"\\{m.var} => {print_term(m.body)}"
    if isinstance(m, (ELam, LLam, VLam)):
        return f"\\{m.var}. {print_opbody(m.body)}"
    raise ValueError(f"not an operation body: {m!r}")


def emitted_token(t):
    """The token of an ``emit tok @ L`` shape, or None."""
    if not (isinstance(t, Up) and isinstance(t.term, Unroll) and isinstance(t.term.term, Fix)):
        return None
    handler = t.term.term
    body = handler.body
    if (handler.tag is None or handler.iface != "Out" or not isinstance(body, KLam)
            or body.body != Throw(Var(body.var), UnitVal())):
        return None
    return handler.tag


def _head(t) -> str:
    text = print_term(t)
    if isinstance(t, (Let, Up, Unroll)) and emitted_token(t) is None:
        return f"({text})"
    return text


def print_term(t) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, UnitVal):
        return "unit"
    if isinstance(t, Numeral):
        return f"nat {t.n} @ {print_life(t.life)}"
    if isinstance(t, Fix):
        args = f"[{', '.join(print_effects(a) for a in t.args)}]" if t.args else ""
        tag = f" tag {t.tag}" if t.tag else ""
        return (f"fix {t.self_var} : {t.iface}{args} @ {print_life(t.life)}{tag} "
                f"{{ {print_opbody(t.body)} }}")
    if isinstance(t, OpVal):
        sig = f" <{print_sig(t.sig)}>" if t.sig is not None else ""
        tag = f" tag {t.tag}" if t.tag else ""
        return f"op{sig} @ {print_life(t.life)}{tag} {{ {print_opbody(t.body)} }}"
    if isinstance(t, Cont):
        hole = print_term(plug(t.frames, Var("[]")))
        return f"cont <{print_type(t.src)} ! {print_effects(t.src_eff)}> {{ {hole} }}"
    if isinstance(t, Unroll):
        return f"unroll {_head(t.term)}"
    if isinstance(t, EApp):
        return f"{_head(t.term)}[{print_effects(t.eff)}]"
    if isinstance(t, LApp):
        return f"{_head(t.term)}[{print_life(t.life)}]"
    if isinstance(t, App):
        return f"{_head(t.fn)}({print_term(t.arg)})"
    if isinstance(t, RegionNew):
        return f"region {print_life(t.label)} {{ {print_term(t.body)} }}"
    if isinstance(t, Reset):
        return f"reset {print_life(t.label)} {{ {print_term(t.body)} }}"
    if isinstance(t, Up):
        token = emitted_token(t)
        if token is not None:
            return f"emit {token} @ {print_life(t.term.term.life)}"
        return f"raise {print_term(t.term)}"
    if isinstance(t, Let):
        return f"let {t.var} = {_head(t.bound) if isinstance(t.bound, Let) else print_term(t.bound)} in {print_term(t.body)}"
    if isinstance(t, Throw):
        return f"throw({print_term(t.cont)}, {print_term(t.arg)})"
    raise ValueError(f"not a term: {t!r}")


def print_program(p: Program) -> str:
    lines = []
    for decl in p.interfaces:
        params = f"[{', '.join(decl.params)}]" if decl.params else ""
        home = f" @ {decl.home}" if decl.home else ""
        lines.append(f"interface {decl.name}{params}{home} = {print_sig(decl.sig)};")
    lines.append(print_term(p.main))
    return "\n".join(lines) + "\n"


def summarize(t, limit: int = 80) -> str:
    text = print_term(t)
    return text if len(text) <= limit else text[: limit - 3] + "..."
