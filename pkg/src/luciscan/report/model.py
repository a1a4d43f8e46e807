"""Findings and scan reports, with deterministic (de)serialization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from ..taint.triggers import VULN_TYPES

TRUE_ALARM = "TRUE_ALARM"
FALSE_ALARM = "FALSE_ALARM"
UNEVALUATED = "UNEVALUATED"


def finding_id(file: str, sink_name: str, arg: int, source_name: str, line: int, col: int) -> str:
    key = "\0".join([file, sink_name, str(arg), source_name, str(line), str(col)])
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


@dataclass
class Finding:
    id: str
    type: str
    file: str
    function: str  # function whose source text contains the sink
    sink: dict  # {name, line, col, arg}
    source: dict  # {name, kind, file, line, col}
    chain: list  # [{file, line, function, excerpt}]
    call_path: list = field(default_factory=list)  # [{function, file, start_line, end_line}]
    root: str = ""  # analysis root the flow was found from
    web_reachable: bool = False
    framework: str = ""
    sanitized: bool = False
    duplicates: int = 1
    llm_label: Optional[str] = None
    llm_votes: Optional[dict] = None
    llm_confidence: Optional[float] = None

    def dedup_key(self) -> tuple:
        return (self.function, self.sink["name"], self.sink["arg"], self.source["name"])

    def sort_key(self) -> tuple:
        return (self.file, self.sink["line"], self.sink["arg"], self.sink["col"],
                self.source["name"], self.id)

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "type": self.type,
            "file": self.file,
            "function": self.function,
            "sink": {k: self.sink[k] for k in ("name", "line", "col", "arg")},
            "source": {k: self.source[k] for k in ("name", "kind", "file", "line", "col")},
            "chain": [{k: c[k] for k in ("file", "line", "function", "excerpt")} for c in self.chain],
            "call_path": [{k: c[k] for k in ("function", "file", "start_line", "end_line")}
                          for c in self.call_path],
            "root": self.root,
            "web_reachable": self.web_reachable,
            "framework": self.framework,
            "sanitized": self.sanitized,
            "duplicates": self.duplicates,
        }
        if self.llm_label is not None:
            out["llm_label"] = self.llm_label
            out["llm_votes"] = self.llm_votes
            out["llm_confidence"] = self.llm_confidence
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(
            id=d["id"], type=d["type"], file=d["file"], function=d["function"],
            sink=dict(d["sink"]), source=dict(d["source"]), chain=[dict(c) for c in d["chain"]],
            call_path=[dict(c) for c in d.get("call_path", [])], root=d.get("root", ""),
            web_reachable=d["web_reachable"], framework=d.get("framework", ""),
            sanitized=d["sanitized"], duplicates=d.get("duplicates", 1),
            llm_label=d.get("llm_label"), llm_votes=d.get("llm_votes"),
            llm_confidence=d.get("llm_confidence"),
        )


def empty_stats() -> dict:
    return {
        "counts": {t: 0 for t in VULN_TYPES},
        "findings": 0,
        "pruned": 0,
        "framework_dropped": 0,
        "sanitized_suppressed": 0,
        "duplicates_collapsed": 0,
    }


@dataclass
class ScanReport:
    tool_version: str
    scan_root: str
    file_count: int = 0
    parse_failures: list = field(default_factory=list)  # [{file, line, col, message}]
    warnings: list = field(default_factory=list)  # [{file, message}]
    diagnostics: list = field(default_factory=list)  # [{kind, file, line, detail}]
    findings: list = field(default_factory=list)
    pruned: list = field(default_factory=list)
    stats: dict = field(default_factory=empty_stats)

    def finalize(self) -> "ScanReport":
        self.findings.sort(key=Finding.sort_key)
        self.pruned.sort(key=Finding.sort_key)
        self.parse_failures.sort(key=lambda p: (p["file"], p["line"], p["col"]))
        self.warnings.sort(key=lambda w: (w["file"], w["message"]))
        self.diagnostics.sort(key=lambda d: (d["file"], d["line"], d["kind"], d["detail"]))
        counts = {t: 0 for t in VULN_TYPES}
        for f in self.findings:
            counts[f.type] += 1
        self.stats["counts"] = counts
        self.stats["findings"] = len(self.findings)
        self.stats["pruned"] = len(self.pruned)
        return self

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "scan_root": self.scan_root,
            "file_count": self.file_count,
            "parse_failures": [dict(p) for p in self.parse_failures],
            "warnings": [dict(w) for w in self.warnings],
            "diagnostics": [dict(d) for d in self.diagnostics],
            "findings": [f.to_dict() for f in self.findings],
            "pruned": [f.to_dict() for f in self.pruned],
            "stats": self.stats,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanReport":
        return cls(
            tool_version=d["tool_version"], scan_root=d["scan_root"], file_count=d["file_count"],
            parse_failures=[dict(p) for p in d["parse_failures"]],
            warnings=[dict(w) for w in d.get("warnings", [])],
            diagnostics=[dict(x) for x in d.get("diagnostics", [])],
            findings=[Finding.from_dict(f) for f in d["findings"]],
            pruned=[Finding.from_dict(f) for f in d.get("pruned", [])],
            stats=d["stats"],
        )

    @property
    def exit_code(self) -> int:
        return 1 if self.findings else 0


def dedup(findings: list) -> list:
    """Collapse findings sharing (function, sink, argument, source).

    The representative is the lexicographically smallest by file and sink
    position; ``duplicates`` counts the collapsed findings.
    """
    groups: dict = {}
    for f in findings:
        groups.setdefault(f.dedup_key(), []).append(f)
    out = []
    for group in groups.values():
        group.sort(key=lambda f: (f.file, f.sink["line"], f.sink["col"], f.id))
        rep = group[0]
        rep.duplicates = sum(f.duplicates for f in group)
        out.append(rep)
    out.sort(key=Finding.sort_key)
    return out
