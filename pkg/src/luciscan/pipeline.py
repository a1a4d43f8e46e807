"""End-to-end scan: discover, parse, lower, resolve, inline, analyze, report."""

from __future__ import annotations

import logging
import os
import resource
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Optional

from . import __version__
from .cfg.builder import build_cfgs
from .cfg.dispatch import attach_dispatched, extract_dispatch_entries
from .cfg.functions import build_function_dictionary
from .cfg.inline import DEFAULT_MAX_INLINE_DEPTH, DEPTH_EXCEEDED, UNRESOLVED, expand
from .frontend.files import DEFAULT_PATTERNS, RootNotFound, collect_files
from .frontend.lexer import LuaSyntaxError
from .frontend.parser import parse_chunk
from .frontend.prescan import DEFAULT_FIXUPS, load_fixup_table, prescan_source
from .report.model import Finding, ScanReport, dedup, finding_id
from .taint.engine import analyze_flows
from .taint.framework import apply_framework_rules, build_call_site_index
from .taint.triggers import TriggerWords, load_trigger_words

log = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "text")


class ConfigInvalid(ValueError):
    pass


@dataclass
class LlmOptions:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4"
    votes: int = 5
    api_key_env: str = "LUCISCAN_LLM_API_KEY"
    max_in_flight: int = 4
    context_limit: int = 24000  # characters of prompt before middle functions are truncated
    timeout: float = 60.0


@dataclass
class ScanConfig:
    root: str
    luci_only: bool = False
    include: tuple = DEFAULT_PATTERNS
    exclude: tuple = ()
    trigger_words: Optional[str] = None
    fixups: Optional[str] = None
    framework_rules: bool = True
    inline_depth: int = DEFAULT_MAX_INLINE_DEPTH
    dict_approx: bool = True
    llm: Optional[LlmOptions] = None
    output_format: str = "json"
    output: Optional[str] = None
    workers: int = 1
    timings: bool = False

    def validate(self) -> None:
        if self.inline_depth < 0:
            raise ConfigInvalid("inline depth must be >= 0")
        if self.workers < 1:
            raise ConfigInvalid("worker count must be >= 1")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigInvalid(f"output format must be one of {', '.join(OUTPUT_FORMATS)}")
        if not self.include:
            raise ConfigInvalid("at least one include pattern is required")
        if self.llm is not None and self.llm.votes < 1:
            raise ConfigInvalid("LLM vote count must be >= 1")


@dataclass
class FileResult:
    path: str
    text: str = ""
    cfgs: list = field(default_factory=list)
    entries: list = field(default_factory=list)
    fixups: int = 0
    failure: Optional[dict] = None
    diagnostics: list = field(default_factory=list)


def process_file(root: str, rel: str, fixup_table=DEFAULT_FIXUPS) -> FileResult:
    """Prescan, parse and lower one file; failures are recorded, never raised."""
    result = FileResult(rel)
    try:
        raw = (Path(root) / rel).read_bytes()
    except OSError as e:
        result.failure = {"file": rel, "line": 0, "col": 0, "message": f"unreadable: {e.strerror}"}
        return result
    sanitized, fixups = prescan_source(raw, fixup_table)
    result.fixups = len(fixups)
    text = sanitized.decode("latin-1")
    result.text = text
    try:
        chunk = parse_chunk(text, rel)
    except LuaSyntaxError as e:
        result.failure = {"file": rel, "line": e.line, "col": e.col, "message": e.message}
        return result
    except RecursionError:
        result.failure = {"file": rel, "line": 0, "col": 0, "message": "nesting too deep"}
        return result
    result.cfgs = build_cfgs(chunk, text, rel)
    diags: list = []
    result.entries = extract_dispatch_entries(chunk, rel, diags)
    for cfg in result.cfgs:
        for kind, detail, span in cfg.diagnostics:
            diags.append((kind, detail, span))
    result.diagnostics = [_diag(kind, rel, detail, span) for kind, detail, span in diags]
    return result


def _diag(kind: str, file: str, detail: str, span) -> dict:
    return {"kind": kind, "file": span.file if span is not None else file,
            "line": span.start_line if span is not None else 0, "detail": str(detail)}


# -- per-root analysis (runs in worker processes) -------------------------------

_STATE: dict = {}


def _init_worker(roots, fdict, tw, depth) -> None:
    _STATE.update(roots=roots, fdict=fdict, tw=tw, depth=depth)


def _chunk_label(path: str) -> str:
    return f"<chunk:{PurePosixPath(path).name}>"


def _display_name(cfg_name: str, path: str) -> str:
    return _chunk_label(path) if cfg_name == "<chunk>" else cfg_name


def _span_lines(span) -> tuple:
    return (span.start_line, span.end_line) if span is not None else (0, 0)


def analyze_root(index: int) -> dict:
    """Expand one root and return its flows as plain records."""
    root = _STATE["roots"][index]
    expanded = expand(root, _STATE["fdict"], _STATE["depth"])
    flows, sanitized = analyze_flows(expanded, _STATE["tw"])
    records = [_flow_record(index, root, expanded, f) for f in flows]
    records += [_flow_record(index, root, expanded, f) for f in sanitized]
    counts = {UNRESOLVED: 0, DEPTH_EXCEEDED: 0}
    for kind, _, _ in expanded.diagnostics:
        if kind in counts:
            counts[kind] += 1
    return {"flows": records, "sites": expanded.next_site - 1,
            "unresolved": counts[UNRESOLVED], "depth_exceeded": counts[DEPTH_EXCEEDED]}


def _flow_record(index: int, root, cfg, flow) -> dict:
    sink_node = cfg[flow.sink_node]
    sink_span = flow.sink_span
    sink_file = sink_span.file if sink_span is not None else root.source_path
    src = flow.source
    if src.kind == "param":
        s_line, s_col = (root.span.start_line, root.span.start_col) if root.span else (1, 1)
        src_file = root.source_path
    else:
        s_line, s_col = src.span.start_line, src.span.start_col
        src_file = src.span.file
    chain = []
    for nid in flow.chain:
        n = cfg[nid]
        chain.append({
            "file": n.span.file if n.span is not None else root.source_path,
            "line": n.span.start_line if n.span is not None else s_line,
            "function": _display_name(n.origin, n.span.file if n.span is not None else root.source_path),
            "excerpt": n.label,
        })
    chain.append({"file": sink_file, "line": sink_span.start_line,
                  "function": _display_name(sink_node.origin, sink_file),
                  "excerpt": sink_node.label})
    call_path = [{"function": _display_name(root.name, root.source_path), "file": root.source_path,
                  "start_line": _span_lines(root.span)[0], "end_line": _span_lines(root.span)[1]}]
    for name, path, span in cfg.site_path(sink_node.site):
        call_path.append({"function": name, "file": path, "start_line": _span_lines(span)[0],
                          "end_line": _span_lines(span)[1]})
    return {
        "root_index": index,
        "type": flow.type,
        "file": sink_file,
        "function": _display_name(sink_node.origin, sink_file),
        "sink": {"name": flow.sink_name, "line": sink_span.start_line, "col": sink_span.start_col,
                 "arg": flow.arg},
        "source": {"name": src.name, "kind": src.kind, "file": src_file, "line": s_line, "col": s_col},
        "source_leaf": src,
        "chain": chain,
        "call_path": call_path,
        "sanitized": flow.sanitized,
    }


# -- orchestration --------------------------------------------------------------

@dataclass
class ScanResult:
    report: ScanReport
    files: dict  # rel path -> sanitized text (for prompt construction)
    roots: list
    exit_code: int


def _peak_rss_kb() -> int:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss + \
        resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss


def scan(config: ScanConfig, tw: Optional[TriggerWords] = None, llm_client=None) -> ScanResult:
    """Run the whole pipeline; raises RootNotFound / ConfigError / ConfigInvalid on fatal errors."""
    config.validate()
    t0 = time.perf_counter()
    timings: dict = {}
    if tw is None:
        tw = load_trigger_words(config.trigger_words)
    fixup_table = load_fixup_table(config.fixups) if config.fixups else DEFAULT_FIXUPS

    warnings: list = []
    rels = collect_files(config.root, config.include, config.exclude, config.luci_only, warnings)
    report = ScanReport(tool_version=__version__, scan_root=Path(config.root).resolve().name,
                        file_count=len(rels))
    report.warnings = [{"file": f, "message": m} for f, m in warnings]

    t = time.perf_counter()
    root_str = str(config.root)
    if config.workers > 1 and len(rels) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(process_file, [root_str] * len(rels), rels,
                                    [fixup_table] * len(rels), chunksize=max(1, len(rels) // (config.workers * 4))))
    else:
        results = [process_file(root_str, rel, fixup_table) for rel in rels]
    timings["parse_s"] = time.perf_counter() - t

    all_cfgs, entries, texts = [], [], {}
    for r in results:  # sorted path order: dictionary last-wins is deterministic
        if r.failure is not None:
            report.parse_failures.append(r.failure)
            continue
        texts[r.path] = r.text
        all_cfgs.extend(r.cfgs)
        entries.extend(r.entries)
        report.diagnostics.extend(r.diagnostics)

    t = time.perf_counter()
    fdict = build_function_dictionary(all_cfgs, approximate=config.dict_approx)
    attach_diags: list = []
    roots = attach_dispatched(all_cfgs, entries, fdict, attach_diags)
    for kind, detail, span in attach_diags:
        report.diagnostics.append(_diag(kind, span.file if span else "", detail, span))
    call_sites = build_call_site_index(all_cfgs, fdict)
    roots = select_roots(roots, call_sites)
    timings["dictionary_s"] = time.perf_counter() - t

    t = time.perf_counter()
    if config.workers > 1 and len(roots) > 1:
        with ProcessPoolExecutor(config.workers, initializer=_init_worker,
                                 initargs=(roots, fdict, tw, config.inline_depth)) as pool:
            outputs = list(pool.map(analyze_root, range(len(roots)),
                                    chunksize=max(1, len(roots) // (config.workers * 4))))
    else:
        _init_worker(roots, fdict, tw, config.inline_depth)
        outputs = [analyze_root(i) for i in range(len(roots))]
        _STATE.clear()
    timings["analysis_s"] = time.perf_counter() - t

    raw: list[Finding] = []
    sanitized_count = dropped = 0
    inlining = {"sites": 0, "unresolved": 0, "depth_exceeded": 0}
    for out in outputs:
        for key in inlining:
            inlining[key] += out[key]
        for rec in out["flows"]:
            if rec["sanitized"]:
                sanitized_count += 1
                continue
            root = roots[rec["root_index"]]
            keep, reason = apply_framework_rules(_FlowView(rec), root, call_sites)
            if config.framework_rules and not keep:
                dropped += 1
                continue
            raw.append(Finding(
                id=finding_id(rec["file"], rec["sink"]["name"], rec["sink"]["arg"], rec["source"]["name"],
                              rec["sink"]["line"], rec["sink"]["col"]),
                type=rec["type"], file=rec["file"], function=rec["function"], sink=rec["sink"],
                source=rec["source"], chain=rec["chain"], call_path=rec["call_path"],
                root=_display_name(root.name, root.source_path), web_reachable=keep,
                framework=reason, sanitized=False,
            ))
    before = len(raw)
    findings = dedup(raw)
    report.stats["framework_dropped"] = dropped
    report.stats["sanitized_suppressed"] = sanitized_count
    report.stats["duplicates_collapsed"] = before - len(findings)
    report.stats["inlining"] = inlining

    if config.llm is not None:
        from .llm import prune_findings
        t = time.perf_counter()
        kept, pruned, llm_stats = prune_findings(findings, texts, roots, config.llm, client=llm_client)
        findings = kept
        report.pruned = pruned
        report.stats["llm"] = llm_stats
        timings["llm_s"] = time.perf_counter() - t
    report.findings = findings
    report.finalize()
    if config.timings:
        timings["wall_s"] = time.perf_counter() - t0
        report.stats["timings"] = {k: round(v, 6) for k, v in timings.items()}
        report.stats["peak_rss_kb"] = _peak_rss_kb()
        report.stats["dictionary_instances"] = fdict.instance_count
    return ScanResult(report, texts, roots, report.exit_code)


def select_roots(cfgs: list, call_sites) -> list:
    """Analysis entry points: chunks, public or dispatched functions, and uncalled locals.

    A local function with call sites is analyzed only as inlined into its
    callers, where its parameters carry the callers' actual arguments.
    """
    called = set(call_sites.sites)
    return [c for c in cfgs
            if c.is_chunk or not c.is_local or c.web_reachable or c.name not in called]


class _FlowView:
    """Adapter giving framework rules the fields they read from a flow record."""

    def __init__(self, rec: dict):
        self.source = rec["source_leaf"]


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


__all__ = ["ScanConfig", "LlmOptions", "ConfigInvalid", "scan", "process_file", "RootNotFound"]
