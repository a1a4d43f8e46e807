"""Extraction of LuCI dispatcher registrations (``entry(path, target, ...)``)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import PurePosixPath
from typing import Optional

from ..frontend import ast
from .functions import FunctionDict
from .nodes import Cfg

DYNAMIC_SEGMENT = "*"
TARGET_KINDS = ("call", "template", "cbi", "form", "ref", "function", "other", "none")
_TARGET_HELPERS = {"call", "template", "cbi", "form", "arcombine", "alias", "firstchild", "post", "post_on"}


@dataclass
class DispatchEntry:
    path_segments: list
    target: Optional[str]  # function name for call/ref/function targets, else the helper argument
    target_kind: str = "none"
    title: Optional[str] = None
    order: Optional[float] = None
    source_span: Optional[ast.Span] = None
    dynamic: bool = False  # True when any path segment is not a string literal
    dynamic_segments: list = field(default_factory=list)  # indexes of dynamic segments
    controller: bool = False
    file: str = ""

    @property
    def function_target(self) -> Optional[str]:
        """Name of the Lua function the dispatcher calls, if any."""
        return self.target if self.target_kind in ("call", "ref", "function") else None

    @property
    def url(self) -> str:
        return "/".join(self.path_segments)


def is_controller_path(path: str) -> bool:
    return "controller" in PurePosixPath(path).parts[:-1]


def _is_entry_call(node) -> bool:
    if not isinstance(node, ast.Call):
        return False
    name = node.qualified_name
    return name is not None and (name == "entry" or name.endswith(".entry"))


def _literal_text(node) -> Optional[str]:
    if isinstance(node, ast.StringLit):
        return node.value
    # translated titles: _("Status") / translate("Status")
    if isinstance(node, ast.Call) and node.qualified_name in ("_", "translate", "luci.i18n.translate"):
        if len(node.args) == 1 and isinstance(node.args[0], ast.StringLit):
            return node.args[0].value
    return None


def _target(node, path: str) -> tuple[Optional[str], str]:
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _TARGET_HELPERS:
        helper = node.func.id
        arg = node.args[0] if node.args else None
        name = arg.value if isinstance(arg, ast.StringLit) else None
        if helper in ("call", "post", "post_on"):
            # post_on(params, "fname") carries the function name last
            if helper == "post_on" and len(node.args) > 1 and isinstance(node.args[-1], ast.StringLit):
                name = node.args[-1].value
            return name, "call"
        if helper in ("template", "cbi", "form"):
            return name, helper
        return name, "other"
    if isinstance(node, ast.FunctionDef):
        return f"<anon:{path}:{node.span.start_line}>", "function"
    static = ast.static_name(node)
    if static is not None:
        return static, "ref"
    return None, "other"


def extract_dispatch_entries(chunk: ast.Chunk, path: str = "", diagnostics: Optional[list] = None) -> list[DispatchEntry]:
    """Every ``entry(...)`` call in the file, in source order.

    Malformed calls (no arguments, or a first argument that cannot be a
    path) are recorded in ``diagnostics`` as ``MalformedEntry`` and skipped.
    """
    path = path or chunk.span.file
    controller = is_controller_path(path)
    entries = []
    for node in chunk.walk():
        if not _is_entry_call(node):
            continue
        if not node.args:
            if diagnostics is not None:
                diagnostics.append(("MalformedEntry", "entry() without a path", node.span))
            continue
        first = node.args[0]
        dyn_idx: list[int] = []
        if isinstance(first, ast.TableConstructor):
            segments = []
            for i, f in enumerate(first.fields):
                if f.key is not None:
                    continue
                if isinstance(f.value, ast.StringLit):
                    segments.append(f.value.value)
                else:
                    segments.append(DYNAMIC_SEGMENT)
                    dyn_idx.append(len(segments) - 1)
            if not segments:
                if diagnostics is not None:
                    diagnostics.append(("MalformedEntry", "entry() with an empty path", node.span))
                continue
        elif isinstance(first, (ast.Name, ast.Index, ast.Call, ast.MethodCall, ast.Paren)):
            segments = [DYNAMIC_SEGMENT]
            dyn_idx = [0]
        else:
            if diagnostics is not None:
                diagnostics.append(("MalformedEntry", "entry() path is not a table", node.span))
            continue
        target, kind = (None, "none")
        if len(node.args) > 1:
            target, kind = _target(node.args[1], path)
        title = _literal_text(node.args[2]) if len(node.args) > 2 else None
        order = None
        if len(node.args) > 3 and isinstance(node.args[3], ast.NumberLit):
            order = float(node.args[3].value)
        entries.append(DispatchEntry(
            path_segments=segments, target=target, target_kind=kind, title=title, order=order,
            source_span=node.span, dynamic=bool(dyn_idx), dynamic_segments=dyn_idx,
            controller=controller, file=path,
        ))
    return entries


def attach_dispatched(
    cfg_list: list[Cfg],
    entries: list[DispatchEntry],
    fdict: FunctionDict,
    diagnostics: Optional[list] = None,
) -> list[Cfg]:
    """Mark every dispatcher target as web reachable and ensure it is a root.

    A target is looked up first among the Cfgs of the registering file (LuCI
    resolves ``call("f")`` against the controller module), then in the
    function dictionary. Missing targets are recorded as ``TargetNotFound``.
    """
    roots = list(cfg_list)
    present = {id(c) for c in roots}
    by_file: dict[tuple[str, str], Cfg] = {}
    for c in cfg_list:
        if not c.is_chunk:
            by_file[(c.source_path, c.name)] = c
    for e in entries:
        name = e.function_target
        if name is None:
            continue
        cfg = by_file.get((e.file, name)) or fdict.get(name)
        if cfg is None:
            if diagnostics is not None:
                diagnostics.append(("TargetNotFound", name, e.source_span))
            continue
        cfg.web_reachable = True
        if id(cfg) not in present:
            roots.append(cfg)
            present.add(id(cfg))
    return roots
