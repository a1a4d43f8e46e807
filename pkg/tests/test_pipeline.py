"""End-to-end pipeline: worker invariance, mode equivalences and root selection."""

from __future__ import annotations

import pytest

from luciscan.frontend import RootNotFound
from luciscan.pipeline import ConfigInvalid, ScanConfig, process_file, scan
from luciscan.report import emit_json
from luciscan.selftest import corpus_trigger_words, load_corpus, shipped_corpus, stage

from conftest import scan_tree, stage as stage_files, stage_reference


@pytest.fixture(scope="module")
def corpus_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    stage(load_corpus(shipped_corpus()), root)
    return root


def corpus_scan(root, **kw):
    return scan(ScanConfig(str(root), **kw), tw=corpus_trigger_words(shipped_corpus()))


def test_worker_count_invariance(corpus_root):
    one = emit_json(corpus_scan(corpus_root, workers=1).report)
    four = emit_json(corpus_scan(corpus_root, workers=4).report)
    assert one == four


def test_framework_rules_give_subset(corpus_root):
    on = {f.id for f in corpus_scan(corpus_root).report.findings}
    off = {f.id for f in corpus_scan(corpus_root, framework_rules=False).report.findings}
    assert on < off


def test_exact_dictionary_same_findings(corpus_root):
    approx = corpus_scan(corpus_root).report
    exact = corpus_scan(corpus_root, dict_approx=False).report
    assert emit_json(approx) == emit_json(exact)


def test_reference_tree_findings(tmp_path):
    stage_reference(tmp_path)
    report = scan_tree(tmp_path).report
    got = sorted((f.type, f.sink["name"], f.function) for f in report.findings)
    assert got == [("CI", "io.popen", "get_device_byif"), ("CI", "luci.sys.call", "iface_reconnect"),
                   ("CI", "os.execute", "<chunk:bean.lua>"), ("PAT", "os.remove", "action_del_script")]
    assert report.stats["counts"] == {"CI": 3, "RCE": 0, "PAT": 1, "SQLI": 0}


def test_inline_depth_zero_loses_interprocedural_flow(tmp_path):
    stage_reference(tmp_path, ["listing3_bridge.lua"])
    assert len(scan_tree(tmp_path).report.findings) == 1
    report = scan_tree(tmp_path, inline_depth=0).report
    assert report.findings == [] and report.stats["inlining"]["depth_exceeded"] > 0


def test_called_local_helper_analyzed_only_inlined(tmp_path):
    stage_files(tmp_path, {"usr/lib/lua/luci/model/m.lua": (
        'local function helper(x)\n  os.execute(x)\nend\n'
        'function action()\n  helper(luci.http.formvalue("a"))\nend\n')})
    result = scan_tree(tmp_path, framework_rules=False)
    assert "helper" not in [c.name for c in result.roots]
    (f,) = result.report.findings
    assert (f.root, f.function, f.source["name"]) == ("action", "helper", "luci.http.formvalue")


def test_uncalled_local_function_is_a_root(tmp_path):
    stage_files(tmp_path, {"a.lua": 'local function lonely(x)\n  os.execute(x)\nend\n'})
    assert "lonely" in [c.name for c in scan_tree(tmp_path).roots]


def test_process_file_records_failures(tmp_path):
    stage_files(tmp_path, {"bad.lua": "x = = 1", "ok.lua": "x = 1"})
    bad = process_file(str(tmp_path), "bad.lua")
    assert bad.failure["file"] == "bad.lua" and bad.failure["line"] == 1 and bad.cfgs == []
    assert process_file(str(tmp_path), "ok.lua").failure is None
    deep = tmp_path / "deep.lua"
    deep.write_text("x = " + "(" * 5000 + "1" + ")" * 5000)
    assert process_file(str(tmp_path), "deep.lua").failure is not None


def test_fatal_errors(tmp_path):
    with pytest.raises(RootNotFound):
        scan(ScanConfig(str(tmp_path / "absent")))
    with pytest.raises(ConfigInvalid):
        scan(ScanConfig(str(tmp_path), include=()))


def test_escape_fixups_let_files_parse(tmp_path):
    stage_files(tmp_path, {"usr/lib/lua/luci/controller/p.lua": (
        'function action()\n  local v = luci.http.formvalue("v")\n'
        '  if v:match("^[0-9\\*]+$") then end\n  os.execute("x " .. v)\nend\n')})
    report = scan_tree(tmp_path).report
    assert report.parse_failures == [] and len(report.findings) == 1
