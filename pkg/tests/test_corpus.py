import json

import pytest

from utils.diagnostics import CorpusFailure
from harness.corpus import CorpusEntry, check_entry, load_manifest, render_report, run_corpus


def _entry(corpus_dir, **overrides):
    raw = {
        "id": "trivial",
        "core": str(corpus_dir / "trivial.olaf"),
        "expected": {"outcome": "Finished", "tokens": str(corpus_dir / "trivial.expected")},
        "provenance": "TRIVIAL",
    }
    raw.update(overrides)
    return raw


def _write(tmp_path, entries):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(entries))
    return path


def test_manifest_loads(corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.json")
    ids = [e.id for e in entries]
    assert "pingpong" in ids and "escape" in ids
    derived = [e for e in entries if e.provenance == "DERIVED"]
    assert derived and all(e.oracle for e in derived)


def test_whole_corpus_passes(corpus_dir):
    report = run_corpus(corpus_dir / "manifest.json")
    assert [r.detail for r in report.failed] == []
    assert report.passed
    by_id = {r.id: r for r in report.results}
    assert by_id["trivial"].steps == 2
    assert by_id["escape"].outcome == "TypeError"
    assert "surface trace matches core" in by_id["pingpong"].notes
    assert "surface trace matches core" in by_id["greeting"].notes


def test_corpus_passes_with_the_shortcut(corpus_dir):
    report = run_corpus(corpus_dir / "manifest.json", tail_fast=True, only=["pingpong", "yield"])
    assert report.passed
    assert [r.id for r in report.results] == ["pingpong", "yield"]


def test_wrong_tokens_fail_the_entry(corpus_dir, tmp_path):
    (tmp_path / "wrong.expected").write_text("nope\n")
    entry = CorpusEntry.model_validate(
        _entry(corpus_dir, expected={"outcome": "Finished", "tokens": "wrong.expected"}))
    result = check_entry(entry, tmp_path)
    assert not result.passed
    assert "tokens" in result.detail


def test_accepted_program_fails_a_type_error_entry(corpus_dir, tmp_path):
    entry = CorpusEntry.model_validate(
        _entry(corpus_dir, expected={"outcome": "TypeError", "code": "EffectEscape"}))
    result = check_entry(entry, tmp_path)
    assert not result.passed
    assert "accepted" in result.detail


def test_missing_files_are_reported(corpus_dir, tmp_path):
    path = _write(tmp_path, [_entry(corpus_dir, core="absent.olaf")])
    report = run_corpus(path)
    assert not report.passed
    assert "missing file" in report.failed[0].detail


@pytest.mark.parametrize("entries", [
    [{"id": "x", "core": "x.olaf", "expected": {"outcome": "Finished", "tokens": "x"}, "provenance": "DERIVED"}],
    [{"id": "x", "core": "x.olaf", "expected": {"outcome": "TypeError", "code": "Oops"}, "provenance": "TRIVIAL"}],
    [{"id": "x", "core": "x.olaf", "expected": {"outcome": "Finished"}, "provenance": "TRIVIAL"}],
    [{"id": "x", "core": "x.olaf", "expected": {"outcome": "Finished", "tokens": "x"}, "provenance": "GUESS"}],
    {"id": "x"},
])
def test_malformed_manifests(tmp_path, entries):
    with pytest.raises(CorpusFailure):
        load_manifest(_write(tmp_path, entries))


def test_repeated_ids_are_rejected(corpus_dir, tmp_path):
    with pytest.raises(CorpusFailure):
        load_manifest(_write(tmp_path, [_entry(corpus_dir), _entry(corpus_dir)]))


def test_report_lists_every_entry(corpus_dir):
    report = run_corpus(corpus_dir / "manifest.json", only=["trivial", "arity"])
    text = render_report(report)
    assert text.startswith("# Corpus report")
    assert "2 entries, 0 failed." in text
    assert "| trivial | pass | Finished | 2 |" in text
    assert "| arity | pass | TypeError |" in text


def test_preservation_holds_across_the_corpus(corpus_dir):
    report = run_corpus(corpus_dir / "manifest.json", check_preservation=True)
    assert [r.detail for r in report.failed] == []
    assert sum(r.steps for r in report.results) >= 100_000
    by_id = {r.id: r for r in report.results}
    assert by_id["countdown"].steps > 11 * 10_000
