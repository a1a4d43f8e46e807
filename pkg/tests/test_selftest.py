"""Self-test harness over annotated fixture corpora."""

from __future__ import annotations

import json
import shutil

from luciscan.selftest import format_table, load_corpus, run_selftest, shipped_corpus
from luciscan.taint.triggers import VULN_TYPES

from conftest import REFERENCE


def test_shipped_corpus_shape():
    fixtures = load_corpus(shipped_corpus())
    assert len(fixtures) >= 60
    by_type = {t: [f for f in fixtures if f.category == t] for t in VULN_TYPES}
    assert all(len(v) >= 15 for v in by_type.values())
    variants = {f.variant for f in fixtures}
    assert {"vulnerable", "sanitized", "constant", "unreachable"} <= variants
    features = {f.feature for f in fixtures}
    assert {"direct", "rename2", "rename3", "rename4", "inline-param", "field", "dispatch-ref"} <= features
    for f in fixtures:
        if f.variant in ("sanitized", "constant"):
            assert f.expected == []
        if f.variant == "unreachable":
            assert f.expected == [] and f.expected_no_fr and not f.web_reachable


def test_shipped_corpus_all_pass_both_modes():
    for rules in (True, False):
        summary = run_selftest(framework_rules=rules)
        assert summary.exit_code == 0, format_table(summary)
        assert all(summary.rows[t]["recall"] == 1.0 for t in VULN_TYPES)
        assert summary.rows["Total"]["false_alarms"] == 0


def _one_fixture(corpus, findings):
    shutil.copyfile(REFERENCE / "listing5_commands.lua", corpus / "one.lua")
    (corpus / "one.expect.json").write_text(json.dumps({
        "path": "usr/lib/lua/luci/controller/one.lua", "category": "PAT", "findings": findings}))


def test_broken_golden_is_one_failure(tmp_path):
    _one_fixture(tmp_path, [{"type": "PAT", "sink": "os.remove", "line": 6, "arg": 1}])
    summary = run_selftest(tmp_path)
    assert summary.exit_code == 1 and len(summary.failures) == 1
    table = format_table(summary)
    assert "0/1 fixtures passed" in table
    assert "FAIL one: missing PAT os.remove@6#1; unexpected PAT os.remove@5#1" in table
    assert summary.rows["PAT"]["missed"] == 1 and summary.rows["PAT"]["false_alarms"] == 1


def test_correct_golden_passes(tmp_path):
    _one_fixture(tmp_path, [{"type": "PAT", "sink": "os.remove", "line": 5, "arg": 1}])
    summary = run_selftest(tmp_path)
    assert summary.exit_code == 0 and summary.rows["PAT"]["recall"] == 1.0


def test_empty_corpus(tmp_path):
    summary = run_selftest(tmp_path)
    assert summary.exit_code == 0 and summary.results == []
    assert summary.rows["Total"]["cases"] == 0 and summary.rows["Total"]["recall"] is None
    assert "0/0 fixtures passed" in format_table(summary)


def test_unparseable_fixture_fails(tmp_path):
    (tmp_path / "bad.lua").write_text("function (")
    (tmp_path / "bad.expect.json").write_text(json.dumps({"category": "CI", "findings": []}))
    summary = run_selftest(tmp_path)
    (failure,) = summary.failures
    assert failure.error and "bad.lua:1" in failure.error
