"""Recall/precision self-test over an annotated fixture corpus.

A fixture is ``<name>.lua`` plus a sidecar ``<name>.expect.json``::

    {
      "path": "usr/lib/lua/luci/controller/ci_direct.lua",   # virtual path when staged
      "category": "CI",                                        # type the fixture exercises
      "variant": "vulnerable" | "sanitized" | "constant" | "unreachable",
      "feature": "direct" | "rename" | "inline" | "field" | "dispatch" | ...,
      "web_reachable": true,                                   # false: flows must be dropped by framework rules
      "findings": [{"type": "CI", "sink": "os.execute", "line": 4, "arg": 1}],
      "findings_without_framework_rules": [...]              # optional
    }

Each fixture is staged alone into a temporary tree at its virtual path and
scanned; the reported findings are compared with the sidecar as a multiset
of (type, sink, line, arg).
"""

from __future__ import annotations

import csv
import json
import shutil
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .pipeline import ScanConfig, scan
from .taint.triggers import VULN_TYPES, TriggerWords, load_trigger_words

EXPECT_SUFFIX = ".expect.json"
TRIGGER_FILE = "trigger_words.json"


def shipped_corpus() -> Path:
    return Path(str(resources.files("luciscan") / "corpus"))


@dataclass
class Fixture:
    name: str
    source: Path
    path: str
    category: str
    variant: str
    feature: str
    expected: list
    expected_no_fr: Optional[list] = None
    web_reachable: bool = True

    @property
    def annotated_unreachable(self) -> bool:
        return not self.web_reachable


@dataclass
class FixtureResult:
    fixture: Fixture
    actual: list
    missing: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    error: Optional[str] = None
    expected: Optional[list] = None  # the expectation this run was compared with

    @property
    def passed(self) -> bool:
        return not self.missing and not self.extra and self.error is None


def _key(d: dict) -> tuple:
    return (d["type"], d["sink"], int(d["line"]), int(d.get("arg", 1)))


def load_corpus(corpus: Path) -> list[Fixture]:
    corpus = Path(corpus)
    fixtures = []
    for side in sorted(corpus.rglob("*" + EXPECT_SUFFIX)):
        name = side.name[: -len(EXPECT_SUFFIX)]
        src = side.with_name(name + ".lua")
        meta = json.loads(side.read_text(encoding="utf-8"))
        fixtures.append(Fixture(
            name=str(side.relative_to(corpus).with_name(name)),
            source=src,
            path=meta.get("path") or f"{name}.lua",
            category=meta.get("category", ""),
            variant=meta.get("variant", "vulnerable"),
            feature=meta.get("feature", ""),
            web_reachable=bool(meta.get("web_reachable", meta.get("variant") != "unreachable")),
            expected=[_key(f) for f in meta.get("findings", [])],
            expected_no_fr=([_key(f) for f in meta["findings_without_framework_rules"]]
                            if "findings_without_framework_rules" in meta else None),
        ))
    return fixtures


def corpus_trigger_words(corpus: Path, override=None) -> TriggerWords:
    if override is not None:
        return load_trigger_words(override)
    candidate = Path(corpus) / TRIGGER_FILE
    return load_trigger_words(candidate if candidate.is_file() else None)


def stage(fixtures: list[Fixture], dest: Path) -> None:
    for fx in fixtures:
        target = Path(dest) / fx.path
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(fx.source, target)


def run_fixture(fx: Fixture, tw: TriggerWords, framework_rules: bool = True, inline_depth: int = 3) -> FixtureResult:
    with tempfile.TemporaryDirectory(prefix="luciscan-selftest-") as tmp:
        stage([fx], Path(tmp))
        try:
            result = scan(ScanConfig(tmp, framework_rules=framework_rules, inline_depth=inline_depth), tw=tw)
        except Exception as e:  # a crash is a failed fixture, not a failed run
            return FixtureResult(fx, [], list(fx.expected), [], error=f"{type(e).__name__}: {e}",
                                 expected=list(fx.expected))
    report = result.report
    actual = [(f.type, f.sink["name"], f.sink["line"], f.sink["arg"]) for f in report.findings]
    expected = fx.expected if framework_rules or fx.expected_no_fr is None else fx.expected_no_fr
    exp_c, act_c = Counter(expected), Counter(actual)
    missing = sorted((exp_c - act_c).elements())
    extra = sorted((act_c - exp_c).elements())
    error = None
    if report.parse_failures:
        error = "; ".join(f"{p['file']}:{p['line']}: {p['message']}" for p in report.parse_failures)
    return FixtureResult(fx, sorted(actual), missing, extra, error, list(expected))


@dataclass
class Summary:
    results: list
    rows: dict  # type -> {cases, expected, detected, missed, false_alarms, recall, precision}

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def summarize(results: list[FixtureResult]) -> Summary:
    rows = {}
    for t in list(VULN_TYPES) + ["Total"]:
        rows[t] = {"cases": 0, "expected": 0, "detected": 0, "missed": 0, "false_alarms": 0}
    for r in results:
        cat = r.fixture.category if r.fixture.category in rows else None
        if cat:
            rows[cat]["cases"] += 1
        rows["Total"]["cases"] += 1
        exp_c = Counter(r.expected if r.expected is not None else r.fixture.expected)
        act_c = Counter(r.actual)
        for key, n in exp_c.items():
            hit = min(n, act_c.get(key, 0))
            for t in (key[0], "Total"):
                rows[t]["expected"] += n
                rows[t]["detected"] += hit
                rows[t]["missed"] += n - hit
        for key, n in act_c.items():
            fp = n - min(n, exp_c.get(key, 0))
            for t in (key[0], "Total"):
                rows[t]["false_alarms"] += fp
    for row in rows.values():
        tp, fn, fp = row["detected"], row["missed"], row["false_alarms"]
        row["recall"] = tp / (tp + fn) if tp + fn else None
        row["precision"] = tp / (tp + fp) if tp + fp else None
    return Summary(results, rows)


def run_selftest(corpus: Optional[Path] = None, trigger_words=None, framework_rules: bool = True) -> Summary:
    corpus = Path(corpus) if corpus is not None else shipped_corpus()
    fixtures = load_corpus(corpus)
    tw = corpus_trigger_words(corpus, trigger_words)
    return summarize([run_fixture(fx, tw, framework_rules) for fx in fixtures])


def _pct(x) -> str:
    return "-" if x is None else f"{100 * x:.2f}%"


def format_table(summary: Summary) -> str:
    header = f"{'Type':<6}{'Cases':>7}{'Expected':>10}{'Detected':>10}{'Missed':>8}{'False+':>8}{'Recall':>10}{'Precision':>11}"
    lines = [header, "-" * len(header)]
    for t, row in summary.rows.items():
        lines.append(
            f"{t:<6}{row['cases']:>7}{row['expected']:>10}{row['detected']:>10}{row['missed']:>8}"
            f"{row['false_alarms']:>8}{_pct(row['recall']):>10}{_pct(row['precision']):>11}"
        )
    failures = summary.failures
    lines.append("")
    lines.append(f"{len(summary.results) - len(failures)}/{len(summary.results)} fixtures passed")
    for r in failures:
        detail = []
        if r.error:
            detail.append(f"error: {r.error}")
        if r.missing:
            detail.append("missing " + ", ".join(f"{t} {s}@{l}#{a}" for t, s, l, a in r.missing))
        if r.extra:
            detail.append("unexpected " + ", ".join(f"{t} {s}@{l}#{a}" for t, s, l, a in r.extra))
        lines.append(f"FAIL {r.fixture.name}: " + "; ".join(detail))
    return "\n".join(lines) + "\n"


def write_figures(summary: Summary, out_dir: Path) -> list[Path]:
    """CSV of the table plus a bar chart of recall and precision per type."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "selftest_recall.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["type", "cases", "expected", "detected", "missed", "false_alarms", "recall", "precision"])
        for t, row in summary.rows.items():
            w.writerow([t, row["cases"], row["expected"], row["detected"], row["missed"], row["false_alarms"],
                        "" if row["recall"] is None else f"{row['recall']:.4f}",
                        "" if row["precision"] is None else f"{row['precision']:.4f}"])
    types = list(summary.rows)
    recall = [100 * (summary.rows[t]["recall"] or 0) for t in types]
    precision = [100 * (summary.rows[t]["precision"] or 0) for t in types]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    xs = range(len(types))
    ax.bar([x - 0.2 for x in xs], recall, width=0.4, label="recall")
    ax.bar([x + 0.2 for x in xs], precision, width=0.4, label="precision")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(types)
    ax.set_ylim(0, 105)
    ax.set_ylabel("%")
    ax.set_title("Manufactured-corpus detection by vulnerability type")
    ax.legend(loc="lower right")
    fig.tight_layout()
    png_path = out_dir / "selftest_recall.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]
