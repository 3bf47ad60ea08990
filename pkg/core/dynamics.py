"""The small-step machine.

A configuration is kept as an explicit frame stack (outermost first) and a
focus term; moving between a term and its evaluation context is free and
never counted as a step. Delimiters are found through a per-label index of
``ResetK`` positions that is validated lazily, so dispatching an operation
does not walk the frames it tunnels through.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from utils.diagnostics import OlafTypeError
from core.printer import summarize
from core.statics import check_program, region_ascription, runtime_env, synth
from core.subst import alpha_eq, instantiate, relabel_interfaces, subst_effect, subst_life, subst_value
from core.syntax import (
    App, AppArgK, AppFunK, BUILTIN_INTERFACES, Cont, EApp, EAppK, ELam, EMPTY,
    EffectSet, Fix, KLam, LApp, LAppK, LLam, Let, LetK, Numeral, OpVal, Program,
    RegionNew, Reset, ResetK, Result, Throw, ThrowK, UNIT, Unroll, UnrollK, Up,
    UpK, Var, VLam, fill, is_value, numeral_body, plug, decompose,
    UNROLL_K, UP_K,
)

log = logging.getLogger(__name__)

RULES = ("ktx", "let", "op", "eapp", "lapp", "app", "throw", "down", "downval", "downup", "tailFast")
DEFAULT_FUEL = 10_000_000


@dataclass
class Counters:
    steps: int = 0
    fresh_labels: int = 0
    context_reifications: int = 0
    delimiter_crossings: int = 0

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "freshLabels": self.fresh_labels,
            "contextReifications": self.context_reifications,
            "delimiterCrossings": self.delimiter_crossings,
        }


@dataclass(frozen=True)
class Config:
    labels: frozenset
    term: object


@dataclass(frozen=True)
class Stepped:
    config: Config
    rule: str


@dataclass(frozen=True)
class Finished:
    value: object


@dataclass(frozen=True)
class Stuck:
    reason: str
    redex: object = None

    def describe(self) -> str:
        where = f" at {summarize(self.redex)}" if self.redex is not None else ""
        return f"{self.reason}{where}"


@dataclass(frozen=True)
class FuelExhausted:
    steps: int


def max_label(term) -> int:
    """Largest label bound or mentioned anywhere in ``term`` (-1 if none)."""
    best = -1
    todo = [term]
    while todo:
        node = todo.pop()
        if isinstance(node, int):
            best = max(best, node)
            continue
        if isinstance(node, EffectSet):
            todo.extend(a for a in node.items if isinstance(a, int))
            continue
        if isinstance(node, (str, type(None), bool)):
            continue
        if isinstance(node, tuple):
            todo.extend(node)
            continue
        for name in getattr(node, "__slots__", ()):
            if name in ("free", "span", "n"):
                continue
            todo.append(getattr(node, name))
    return best


def tunnels(label, ctx) -> bool:
    """True when no delimiter for ``label`` sits between the hole and the top of ``ctx``."""
    return not any(isinstance(f, ResetK) and f.label == label for f in ctx)


class Machine:
    def __init__(self, term, interfaces=None, tail_fast=False, labels=(), on_region=None,
                 program_label=None):
        self.interfaces = interfaces if interfaces is not None else dict(BUILTIN_INTERFACES)
        self.tail_fast = tail_fast
        self.on_region = on_region
        self.stack = []
        self.focus = term
        self.marks = {}
        self.mark_epoch = 0
        self._last_capture = None
        self.program_label = program_label
        self.labels = set(labels)
        self.next_label = max([max_label(term)] + list(self.labels)) + 1
        self.counters = Counters()
        self.rule_counts = Counter()
        self.tokens = []
        self.dispatches = []
        self.outcome = None
        self.last_redex = None
        self._sigs = {}

    # ----- configuration -----

    @property
    def term(self):
        return plug(self.stack, self.focus)

    def config(self) -> Config:
        return Config(frozenset(self.labels), self.term)

    # ----- delimiter index -----

    def _push_reset(self, label):
        q = len(self.stack)
        self.stack.append(ResetK(label))
        self.mark_epoch += 1
        marks = self.marks.setdefault(label, [])
        while marks and marks[-1] >= q:
            marks.pop()
        marks.append(q)

    def _find_delim(self, label) -> Optional[int]:
        marks = self.marks.get(label)
        stack = self.stack
        while marks:
            q = marks[-1]
            if q < len(stack):
                frame = stack[q]
                if type(frame) is ResetK and frame.label == label:
                    return q
            marks.pop()
            self.mark_epoch += 1
        return None

    def _capture(self, p) -> tuple:
        segment = tuple(self.stack[p:])
        del self.stack[p:]
        self._last_capture = (segment, p, self.mark_epoch)
        return segment

    def _reinstate(self, frames):
        last = self._last_capture
        if (last is not None and last[0] is frames and last[1] == len(self.stack)
                and last[2] == self.mark_epoch):
            # the index still holds every mark of the segment at its old height
            self.stack.extend(frames)
            return
        for frame in frames:
            if type(frame) is ResetK:
                self._push_reset(frame.label)
            else:
                self.stack.append(frame)

    # ----- reductions -----

    def _done(self, rule, redex) -> str:
        self.counters.steps += 1
        self.rule_counts[rule] += 1
        self.last_redex = redex
        return rule

    def _stuck(self, reason, redex):
        self.outcome = Stuck(reason, redex)
        return None

    def _signature(self, fix: Fix):
        key = (fix.iface, fix.args, fix.life)
        sig = self._sigs.get(key)
        if sig is None:
            sig = instantiate(self.interfaces[fix.iface], fix.args, fix.life)
            self._sigs[key] = sig
        return sig

    def step(self) -> Optional[str]:
        """Perform one reduction and return its rule; None once finished or stuck."""
        if self.outcome is not None:
            return None
        stack = self.stack
        while True:
            t = self.focus
            if is_value(t):
                if not stack:
                    self.outcome = Finished(t)
                    return None
                frame = stack.pop()
                self.focus = fill(frame, t)
                continue
            cls = type(t)
            if cls is Let:
                if not is_value(t.bound):
                    stack.append(LetK(t.var, t.body))
                    self.focus = t.bound
                    continue
                self.focus = subst_value(t.body, t.var, t.bound)
                return self._done("let", t)
            if cls is App:
                if not is_value(t.fn):
                    stack.append(AppFunK(t.arg))
                    self.focus = t.fn
                    continue
                if not is_value(t.arg):
                    stack.append(AppArgK(t.fn))
                    self.focus = t.arg
                    continue
                fn = t.fn
                if not (type(fn) is OpVal and type(fn.body) is VLam):
                    return self._stuck("BadRedex", t)
                sig = fn.sig.body if fn.sig is not None else None
                self.focus = OpVal(subst_value(fn.body.body, fn.body.var, t.arg), fn.life, sig, fn.tag)
                return self._done("app", t)
            if cls is Up:
                if not is_value(t.term):
                    stack.append(UP_K)
                    self.focus = t.term
                    continue
                return self._dispatch(t)
            if cls is Unroll:
                if not is_value(t.term):
                    stack.append(UNROLL_K)
                    self.focus = t.term
                    continue
                v = t.term
                if type(v) is Fix:
                    body = subst_value(v.body, v.self_var, v)
                    self.focus = OpVal(body, v.life, self._signature(v), v.tag)
                elif type(v) is Numeral:
                    self.focus = OpVal(numeral_body(v.n, v.life), v.life,
                                       self.interfaces["Nat"].sig, None)
                else:
                    return self._stuck("BadRedex", t)
                return self._done("op", t)
            if cls is EApp:
                if not is_value(t.term):
                    stack.append(EAppK(t.eff))
                    self.focus = t.term
                    continue
                v = t.term
                if not (type(v) is OpVal and type(v.body) is ELam):
                    return self._stuck("BadRedex", t)
                sig = subst_effect(v.sig.body, v.sig.var, t.eff) if v.sig is not None else None
                self.focus = OpVal(subst_effect(v.body.body, v.body.var, t.eff), v.life, sig, v.tag)
                return self._done("eapp", t)
            if cls is LApp:
                if not is_value(t.term):
                    stack.append(LAppK(t.life))
                    self.focus = t.term
                    continue
                v = t.term
                if not (type(v) is OpVal and type(v.body) is LLam):
                    return self._stuck("BadRedex", t)
                sig = subst_life(v.sig.body, v.sig.var, t.life) if v.sig is not None else None
                self.focus = OpVal(subst_life(v.body.body, v.body.var, t.life), v.life, sig, v.tag)
                return self._done("lapp", t)
            if cls is Throw:
                if not is_value(t.cont):
                    stack.append(ThrowK(t.arg))
                    self.focus = t.cont
                    continue
                if type(t.cont) is not Cont:
                    return self._stuck("BadRedex", t)
                self._reinstate(t.cont.frames)
                self.focus = t.arg
                return self._done("throw", t)
            if cls is Reset:
                if is_value(t.body):
                    self.focus = t.body
                    return self._done("downval", t)
                self._push_reset(t.label)
                self.focus = t.body
                continue
            if cls is RegionNew:
                fresh = self.next_label
                self.next_label += 1
                self.labels.add(fresh)
                self.counters.fresh_labels += 1
                if t.label == self.program_label:
                    self.interfaces = relabel_interfaces(self.interfaces, t.label, fresh)
                    self._sigs.clear()
                    self.program_label = None
                if self.on_region is not None:
                    self.on_region(t, fresh)
                self.focus = Reset(fresh, subst_life(t.body, t.label, fresh))
                log.debug("fresh label L%d for region L%d", fresh, t.label)
                return self._done("down", t)
            return self._stuck("BadRedex", t)

    def _dispatch(self, t: Up) -> Optional[str]:
        op = t.term
        if not (type(op) is OpVal and type(op.body) is KLam):
            return self._stuck("BadRedex", t)
        p = self._find_delim(op.life)
        if p is None:
            return self._stuck("UnmatchedDelimiter", t)
        if op.tag is not None:
            self.tokens.append(op.tag)
        self.dispatches.append(op.life)
        self.counters.delimiter_crossings += len(self.stack) - 1 - p
        k, body = op.body.var, op.body.body
        if (self.tail_fast and type(body) is Throw and type(body.cont) is Var
                and body.cont.name == k and k not in body.arg.free):
            self.focus = body.arg
            return self._done("tailFast", t)
        segment = self._capture(p)
        sig = op.sig
        src, src_eff = (sig.ty, sig.eff) if isinstance(sig, Result) else (UNIT, EMPTY)
        resumption = Cont(segment, src, src_eff | EffectSet.of(op.life))
        self.counters.context_reifications += 1
        self.focus = subst_value(body, k, resumption)
        return self._done("downup", t)

    def run(self, fuel: int = DEFAULT_FUEL, on_step=None):
        while self.counters.steps < fuel:
            rule = self.step()
            if rule is None:
                return self.outcome
            if on_step is not None:
                on_step(self, rule)
        if self.step_pending():
            return FuelExhausted(self.counters.steps)
        if self.outcome is None:
            self.outcome = Finished(self.focus)
        return self.outcome

    def step_pending(self) -> bool:
        """Whether a further step exists once the budget is spent."""
        if self.outcome is not None:
            return False
        return not (is_value(self.focus) and not self.stack)


# ---------- pure single steps ----------

def step(config: Config, interfaces=None, tail_fast=False):
    """One reduction of ``config``: Stepped, Finished or Stuck."""
    machine = Machine(config.term, interfaces, tail_fast, labels=config.labels)
    rule = machine.step()
    if rule is None:
        return machine.outcome
    return Stepped(Config(frozenset(machine.labels), machine.term), rule)


def tail_fast_step(config: Config, interfaces=None):
    return step(config, interfaces, tail_fast=True)


def matching_rules(term, tail_fast=False) -> list:
    """Every (context depth, rule) pair whose left-hand side matches ``term``.

    Enumerates all splits allowed by the evaluation-context grammar, so a
    deterministic configuration yields exactly one entry.
    """
    found = []
    todo = [((), term)]
    while todo:
        ctx, t = todo.pop()
        rule = _rule_at(ctx, t, tail_fast)
        if rule is not None:
            found.append((len(ctx), rule))
        for frame, child in _eval_children(t):
            todo.append((ctx + (frame,), child))
    return sorted(found)


def _eval_children(t):
    if isinstance(t, Unroll):
        yield UNROLL_K, t.term
    elif isinstance(t, EApp):
        yield EAppK(t.eff), t.term
    elif isinstance(t, LApp):
        yield LAppK(t.life), t.term
    elif isinstance(t, App):
        yield AppFunK(t.arg), t.fn
        if is_value(t.fn):
            yield AppArgK(t.fn), t.arg
    elif isinstance(t, Up):
        yield UP_K, t.term
    elif isinstance(t, Let):
        yield LetK(t.var, t.body), t.bound
    elif isinstance(t, Throw):
        yield ThrowK(t.arg), t.cont
    elif isinstance(t, Reset):
        yield ResetK(t.label), t.body


def _rule_at(ctx, t, tail_fast):
    if isinstance(t, Let) and is_value(t.bound):
        return "let"
    if isinstance(t, Unroll) and isinstance(t.term, (Fix, Numeral)):
        return "op"
    if isinstance(t, EApp) and isinstance(t.term, OpVal) and isinstance(t.term.body, ELam):
        return "eapp"
    if isinstance(t, LApp) and isinstance(t.term, OpVal) and isinstance(t.term.body, LLam):
        return "lapp"
    if (isinstance(t, App) and isinstance(t.fn, OpVal) and isinstance(t.fn.body, VLam)
            and is_value(t.arg)):
        return "app"
    if isinstance(t, Throw) and isinstance(t.cont, Cont):
        return "throw"
    if isinstance(t, RegionNew):
        return "down"
    if isinstance(t, Reset):
        if is_value(t.body):
            return "downval"
        split = decompose(t.body)
        if split is None:
            return None
        inner, redex = split
        if (isinstance(redex, Up) and isinstance(redex.term, OpVal) and isinstance(redex.term.body, KLam)
                and redex.term.life == t.label and tunnels(t.label, inner)):
            body = redex.term.body
            fast = (tail_fast and isinstance(body.body, Throw) and body.body.cont == Var(body.var)
                    and body.var not in body.body.arg.free)
            return "tailFast" if fast else "downup"
    return None


# ---------- whole runs ----------

class TraceWriter:
    """Writes one JSON object per step, then a final report."""

    def __init__(self, stream):
        self.stream = stream

    def record(self, machine: Machine, rule: str):
        entry = {
            "step": machine.counters.steps,
            "rule": rule,
            "labelCount": len(machine.labels),
            "redexSummary": summarize(machine.last_redex),
            "counters": machine.counters.to_dict(),
        }
        self.stream.write(json.dumps(entry) + "\n")

    def finish(self, report: dict):
        self.stream.write(json.dumps(report) + "\n")


@dataclass
class RunResult:
    outcome: object
    counters: Counters
    tokens: list
    dispatches: list
    rule_counts: dict
    preservation_checks: int = 0
    violations: list = field(default_factory=list)

    @property
    def outcome_name(self) -> str:
        return type(self.outcome).__name__

    def report(self) -> dict:
        out = {"outcome": self.outcome_name, "steps": self.counters.steps,
               "counters": self.counters.to_dict()}
        if isinstance(self.outcome, Stuck):
            out["reason"] = self.outcome.describe()
        return out


class PreservationChecker:
    """Re-types every configuration against the program's type.

    Each fresh label is ascribed the type and effect of the region it
    replaces, computed under the ascriptions recorded so far.
    """

    def __init__(self, interfaces, expected, program_label=None):
        self.interfaces = interfaces
        self.program_label = program_label
        self.expected = expected
        self.sigs = {}
        self.checks = 0
        self.violations = []

    def record_region(self, redex: RegionNew, label: int):
        env = runtime_env(self.interfaces, self.sigs)
        try:
            result = region_ascription(env, redex)
        except OlafTypeError as exc:
            self.violations.append(f"region for L{label}: {exc.render()}")
            return
        self.sigs[label] = (result.ty, result.eff)
        if redex.label == self.program_label:
            self.interfaces = relabel_interfaces(self.interfaces, redex.label, label)
            self.program_label = None

    def check(self, machine: Machine, rule: str):
        self.checks += 1
        try:
            got = synth(runtime_env(self.interfaces, self.sigs), machine.term)
        except OlafTypeError as exc:
            self.violations.append(f"step {machine.counters.steps} ({rule}): {exc.render()}")
            return
        same_eff = got.eff.issubset(self.expected.eff) and self.expected.eff.issubset(got.eff)
        if not (alpha_eq(got.ty, self.expected.ty) and same_eff):
            self.violations.append(f"step {machine.counters.steps} ({rule}): type changed to {got.render()}")


def evaluate(program: Program, fuel: int = DEFAULT_FUEL, tail_fast: bool = False,
             check_preservation: bool = False, trace: Optional[TraceWriter] = None,
             audit: bool = False) -> RunResult:
    """Run ``program`` to a value, a stuck state or fuel exhaustion."""
    interfaces = program.table()
    checker = None
    if check_preservation:
        checker = PreservationChecker(interfaces, check_program(program), program.label)
    machine = Machine(program.main, interfaces, tail_fast,
                      on_region=checker.record_region if checker else None,
                      program_label=program.label)
    audit_failures = []
    if audit:
        _audit(machine, "initial", audit_failures, tail_fast)

    def on_step(m, rule):
        if trace is not None:
            trace.record(m, rule)
        if checker is not None:
            checker.check(m, rule)
        if audit:
            _audit(m, rule, audit_failures, tail_fast)

    outcome = machine.run(fuel, on_step)
    result = RunResult(outcome, machine.counters, machine.tokens, machine.dispatches,
                       dict(machine.rule_counts))
    if checker is not None:
        result.preservation_checks = checker.checks
        result.violations.extend(checker.violations)
    result.violations.extend(audit_failures)
    if trace is not None:
        trace.finish(result.report())
    log.info("run finished: %s after %d steps", result.outcome_name, machine.counters.steps)
    return result


def _audit(machine: Machine, rule: str, failures: list, tail_fast: bool):
    term = machine.term
    if is_value(term):
        return
    rules = matching_rules(term, tail_fast)
    if len(rules) != 1:
        failures.append(f"step {machine.counters.steps} ({rule}): {len(rules)} rules apply {rules}")
