"""Corpus manifest, per-entry checks and the markdown report."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional

from jinja2 import Environment, FileSystemLoader, select_autoescape
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.config import TEMPLATES_DIR
from utils.diagnostics import CorpusFailure, DesugarError, OlafError, OlafTypeError
from core.dynamics import DEFAULT_FUEL, Finished, evaluate
from core.parser import parse_program
from core.printer import print_effects, print_type
from core.statics import check_program
from surface.desugar import desugar_source

log = logging.getLogger(__name__)

OUTCOMES = ("Finished", "TypeError", "Stuck", "FuelExhausted")


class Expectation(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    outcome: Literal["Finished", "TypeError", "Stuck", "FuelExhausted"]
    tokens: Optional[str] = None
    code: Optional[str] = None
    surface_code: Optional[str] = Field(default=None, alias="surfaceCode")

    @model_validator(mode="after")
    def _complete(self):
        if self.outcome == "Finished" and self.tokens is None:
            raise ValueError("a Finished expectation names its token file")
        if self.outcome == "TypeError" and self.code is None:
            raise ValueError("a TypeError expectation names its error code")
        if self.code is not None and self.code not in OlafTypeError.CODES:
            raise ValueError(f"unknown type error code {self.code}")
        return self


class CorpusEntry(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    id: str
    core: str
    surface: Optional[str] = None
    expected_type: Optional[str] = Field(default=None, alias="expectedType")
    expected_effects: Optional[str] = Field(default=None, alias="expectedEffects")
    expected: Expectation
    tail_resumptive: bool = Field(default=False, alias="tailResumptive")
    provenance: Literal["REFERENCE", "DERIVED", "TRIVIAL"]
    oracle: Optional[str] = None

    @model_validator(mode="after")
    def _derived_names_oracle(self):
        if self.provenance == "DERIVED" and not self.oracle:
            raise ValueError(f"DERIVED entry {self.id} does not name its oracle")
        return self


def load_manifest(path) -> List[CorpusEntry]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusFailure(f"cannot read manifest {path}", detail=str(exc)) from exc
    if not isinstance(raw, list):
        raise CorpusFailure(f"manifest {path} is not a JSON array")
    entries = []
    for i, item in enumerate(raw):
        try:
            entries.append(CorpusEntry.model_validate(item))
        except ValidationError as exc:
            raise CorpusFailure(f"manifest entry {i} is malformed", detail=str(exc)) from exc
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise CorpusFailure(f"manifest {path} repeats an entry id")
    return entries


def read_tokens(path: Path) -> list:
    return [line.strip() for line in path.read_text().splitlines() if line.strip()]


@dataclass
class EntryResult:
    id: str
    passed: bool = True
    steps: int = 0
    outcome: str = ""
    failures: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def fail(self, message: str):
        self.passed = False
        self.failures.append(message)

    @property
    def detail(self) -> str:
        return "; ".join(self.failures) if self.failures else "; ".join(self.notes)


def _expect_type_error(result: EntryResult, thunk, code: str, where: str):
    try:
        thunk()
    except (OlafTypeError, DesugarError) as exc:
        if exc.code != code:
            result.fail(f"{where}: expected {code}, got {exc.code} ({exc.text})")
        else:
            result.notes.append(f"{where}: rejected with {code}")
        return
    result.fail(f"{where}: expected {code}, but the program was accepted")


def _check_surface_rejects(result: EntryResult, entry: CorpusEntry, text: str):
    code = entry.expected.surface_code or entry.expected.code

    def thunk():
        check_program(desugar_source(text))

    _expect_type_error(result, thunk, code, "surface")


def _run(program, fuel, tail_fast, check_preservation=False, audit=False):
    return evaluate(program, fuel=fuel, tail_fast=tail_fast,
                    check_preservation=check_preservation, audit=audit)


def check_entry(entry: CorpusEntry, root: Path, fuel: int = DEFAULT_FUEL, tail_fast: bool = False,
                check_preservation: bool = False) -> EntryResult:
    """Typecheck and run one entry against its expectations."""
    result = EntryResult(entry.id)
    core_text = (root / entry.core).read_text()
    surface_text = (root / entry.surface).read_text() if entry.surface else None
    try:
        program = parse_program(core_text)
    except OlafError as exc:
        result.fail(f"core: {exc.render()}")
        return result

    if entry.expected.outcome == "TypeError":
        result.outcome = "TypeError"
        _expect_type_error(result, lambda: check_program(program), entry.expected.code, "core")
        if surface_text is not None:
            _check_surface_rejects(result, entry, surface_text)
        return result

    try:
        typing = check_program(program)
    except OlafTypeError as exc:
        result.fail(f"core: {exc.render()}")
        return result
    if entry.expected_type is not None and print_type(typing.ty) != entry.expected_type:
        result.fail(f"type {print_type(typing.ty)}, expected {entry.expected_type}")
    if entry.expected_effects is not None and print_effects(typing.eff) != entry.expected_effects:
        result.fail(f"effects {print_effects(typing.eff)}, expected {entry.expected_effects}")

    primary = _run(program, fuel, tail_fast, check_preservation, audit=True)
    result.steps = primary.counters.steps
    result.outcome = primary.outcome_name
    if primary.outcome_name != entry.expected.outcome:
        result.fail(f"outcome {primary.outcome_name}, expected {entry.expected.outcome}")
    for violation in primary.violations:
        result.fail(violation)

    if entry.expected.tokens is not None:
        want = read_tokens(root / entry.expected.tokens)
        if primary.tokens != want:
            result.fail(f"tokens {primary.tokens[:6]}..., expected {want[:6]}...")

    again = _run(program, fuel, tail_fast)
    if again.tokens != primary.tokens or again.counters.to_dict() != primary.counters.to_dict():
        result.fail("re-running the program changed its trace")

    other = _run(program, fuel, not tail_fast)
    if other.tokens != primary.tokens:
        result.fail("token trace depends on the tail-resumption shortcut")
    fast = primary if tail_fast else other
    if entry.tail_resumptive and isinstance(fast.outcome, Finished) and fast.counters.context_reifications:
        result.fail(f"{fast.counters.context_reifications} context reifications with the shortcut on")

    if surface_text is not None:
        try:
            desugared = desugar_source(surface_text)
            check_program(desugared)
        except OlafError as exc:
            result.fail(f"surface: {exc.render()}")
        else:
            via_surface = _run(desugared, fuel, tail_fast)
            if via_surface.tokens != primary.tokens:
                result.fail("surface and core token traces differ")
            else:
                result.notes.append("surface trace matches core")
    return result


@dataclass
class CorpusReport:
    results: List[EntryResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failed(self) -> List[EntryResult]:
        return [r for r in self.results if not r.passed]


def run_corpus(manifest_path, fuel: int = DEFAULT_FUEL, tail_fast: bool = False,
               check_preservation: bool = False, only: Optional[List[str]] = None) -> CorpusReport:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    results = []
    for entry in load_manifest(manifest_path):
        if only and entry.id not in only:
            continue
        log.info("corpus entry %s", entry.id)
        try:
            res = check_entry(entry, root, fuel, tail_fast, check_preservation)
        except OSError as exc:
            res = EntryResult(entry.id)
            res.fail(f"missing file: {exc}")
        log.info("corpus entry %s %s", entry.id, "passed" if res.passed else "FAILED")
        results.append(res)
    return CorpusReport(results)


def render_report(report: CorpusReport, template_dir=TEMPLATES_DIR) -> str:
    env = Environment(loader=FileSystemLoader(str(template_dir)), autoescape=select_autoescape(["html"]))
    return env.get_template("corpus_report.md.j2").render(report=report)
