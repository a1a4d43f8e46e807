"""JSON and text rendering of scan reports."""

from __future__ import annotations

import json

from .model import ScanReport

ARROW = " → "


def emit_json(report: ScanReport) -> bytes:
    return (json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def parse_json(data) -> ScanReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return ScanReport.from_dict(json.loads(data))


def call_path_text(finding) -> str:
    return ARROW.join(c["function"] for c in finding.call_path)


def _finding_block(f) -> list[str]:
    lines = [
        f"[{f.type}] {f.file}:{f.sink['line']}:{f.sink['col']}  {f.sink['name']} (argument {f.sink['arg']})",
        f"  id:        {f.id}",
        f"  function:  {f.function}",
        f"  source:    {f.source['name']} ({f.source['kind']}) at {f.source['file']}:{f.source['line']}",
    ]
    if f.call_path:
        lines.append(f"  call path: {call_path_text(f)}")
    chain = ARROW.join(f"{c['excerpt']} [{c['file']}:{c['line']}]" for c in f.chain)
    lines.append(f"  chain:     {chain}")
    extra = [f"framework: {f.framework}"] if f.framework else []
    if f.duplicates > 1:
        extra.append(f"duplicates: {f.duplicates}")
    if f.llm_label is not None:
        votes = ", ".join(f"{k}={v}" for k, v in sorted((f.llm_votes or {}).items()))
        extra.append(f"llm: {f.llm_label} ({votes})")
    if extra:
        lines.append("  " + "; ".join(extra))
    return lines


def emit_text(report: ScanReport) -> bytes:
    out = [f"scan root: {report.scan_root}  files: {report.file_count}  "
           f"findings: {len(report.findings)}  pruned: {len(report.pruned)}"]
    for p in report.parse_failures:
        out.append(f"parse failure: {p['file']}:{p['line']}:{p['col']}: {p['message']}")
    for f in report.findings:
        out.append("")
        out.extend(_finding_block(f))
    if report.pruned:
        out.append("")
        out.append("pruned (labeled FALSE_ALARM):")
        for f in report.pruned:
            out.extend("  " + line for line in _finding_block(f))
    counts = report.stats.get("counts", {})
    out.append("")
    out.append("totals: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return ("\n".join(out) + "\n").encode("utf-8")


def emit(report: ScanReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        return emit_json(report)
    if fmt == "text":
        return emit_text(report)
    raise ValueError(f"unknown format {fmt!r}")
