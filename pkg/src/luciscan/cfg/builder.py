"""Lowering of Lua ASTs into per-function control-flow graphs."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from ..frontend import ast
from .nodes import (
    ASSIGNMENT, CALLSITE, CONDITION, DYN, ENTRY, EXIT, STATEMENT,
    CallInfo, Cfg, ExprInfo,
)

VARARGS = "$varargs"
_KEY_RE = re.compile(r"^[^.\[\]#$\s]+$")


class LoweringError(Exception):
    pass


@dataclass
class _Frame:
    prefix: str  # qualified name of the enclosing function ("" at chunk level)
    method_of: Optional[str] = None  # T for a ``function T:m()`` body
    locals: dict = field(default_factory=dict)  # name -> "var" | "func"
    aliases: dict = field(default_factory=dict)  # local name -> module path


def _excerpt(text: str, span: Optional[ast.Span], limit: int = 80) -> str:
    if span is None:
        return ""
    raw = text[span.start:span.end]
    line = raw.split("\n", 1)[0].strip()
    line = re.sub(r"\s+", " ", line)
    if len(line) > limit:
        line = line[: limit - 3] + "..."
    return line


def _module_of(value: ast.Node) -> Optional[str]:
    """``require "m"`` / ``require("m")`` -> ``"m"``."""
    if isinstance(value, ast.Call) and isinstance(value.func, ast.Name) and value.func.id == "require":
        if len(value.args) == 1 and isinstance(value.args[0], ast.StringLit):
            return value.args[0].value
    return None


class CfgBuilder:
    """Build one Cfg per function definition plus one for the chunk."""

    def __init__(self, text: str, path: str):
        self.text = text
        self.path = path
        self.cfgs: list[Cfg] = []
        self.global_aliases: dict[str, str] = {}
        self.frames: list[_Frame] = []
        self._returns: dict[int, list[int]] = {}

    # -- public entry -----------------------------------------------------------

    def build(self, chunk: ast.Chunk) -> list[Cfg]:
        self._collect_global_aliases(chunk)
        frame = _Frame("")
        self.frames.append(frame)
        cfg = Cfg(name="<chunk>", source_path=self.path, span=chunk.span, is_chunk=True)
        self._lower_body(cfg, [], chunk.body, frame)
        self.frames.pop()
        # the chunk first, then functions in definition order
        self.cfgs.insert(0, cfg)
        return self.cfgs

    def _collect_global_aliases(self, chunk: ast.Chunk) -> None:
        for node in chunk.walk():
            if isinstance(node, ast.Assign) and len(node.targets) == 1 and len(node.values) == 1:
                target = node.targets[0]
                if isinstance(target, ast.Name):
                    mod = _module_of(node.values[0])
                    if mod:
                        self.global_aliases[target.id] = mod

    # -- function bodies --------------------------------------------------------

    def _function_name(self, fn: ast.FunctionDef, bound: Optional[str]) -> str:
        if bound:
            return bound
        qn = fn.qualified_name
        if qn is not None:
            if fn.is_local:
                prefix = self.frames[-1].prefix
                return f"{prefix}.{qn}" if prefix else qn
            return qn
        return f"<anon:{self.path}:{fn.span.start_line}>"

    def _build_function(self, fn: ast.FunctionDef, name: str) -> Cfg:
        method_of = None
        if fn.is_method and isinstance(fn.name, ast.Index):
            method_of = ast.static_name(fn.name.obj)
        frame = _Frame(name, method_of)
        params = [VARARGS if p == "..." else p for p in fn.param_names]
        for p in params:
            frame.locals[p] = "var"
        self.frames.append(frame)
        cfg = Cfg(
            name=name,
            source_path=self.path,
            params=params,
            span=fn.span,
            is_local=fn.is_local,
        )
        self.cfgs.append(cfg)
        self._lower_body(cfg, params, fn.body, frame)
        cfg.local_names = set(frame.locals)
        self.frames.pop()
        return cfg

    def _lower_body(self, cfg: Cfg, params: list[str], body: ast.Block, frame: _Frame) -> None:
        entry = cfg.add(ENTRY, label="entry", origin=cfg.name)
        cfg.entry_id = entry.id
        frontier = [entry.id]
        for p in params:
            node = cfg.add(
                ASSIGNMENT, label=f"param {'...' if p == VARARGS else p}",
                span=None, defs=[(p, ExprInfo())], origin=cfg.name, role="param",
            )
            self._link(cfg, frontier, node.id)
            frontier = [node.id]
        frontier = self._block(cfg, body, frontier, None)
        exit_ = cfg.add(EXIT, label="exit", origin=cfg.name)
        cfg.exit_id = exit_.id
        self._link(cfg, frontier, exit_.id)
        for ret in self._returns.pop(id(cfg), []):
            cfg.connect(ret, exit_.id)
        if not exit_.predecessors:
            # only possible when every path diverges; keep Exit well formed
            cfg.connect(entry.id, exit_.id)

    @staticmethod
    def _link(cfg: Cfg, frontier: list[int], target: int) -> None:
        for f in frontier:
            cfg.connect(f, target)

    def _node(self, cfg: Cfg, kind: str, stmt: ast.Node, frontier, label=None, **kw):
        node = cfg.add(
            kind, label=label if label is not None else _excerpt(self.text, stmt.span),
            span=stmt.span, origin=cfg.name, **kw,
        )
        self._link(cfg, frontier, node.id)
        return node

    # -- statements -------------------------------------------------------------

    def _block(self, cfg: Cfg, block: ast.Block, frontier: list[int], loop) -> list[int]:
        for stmt in block.body:
            if not frontier:
                break  # unreachable code after return/break
            frontier = self._stmt(cfg, stmt, frontier, loop)
        return frontier

    def _stmt(self, cfg: Cfg, stmt: ast.Node, frontier: list[int], loop) -> list[int]:
        frame = self.frames[-1]
        if isinstance(stmt, ast.LocalAssign):
            infos, surplus = self._values_for(stmt.targets, stmt.values, local=True)
            for t, v in zip(stmt.targets, stmt.values + [None] * len(stmt.targets)):
                frame.locals[t.id] = "func" if isinstance(v, ast.FunctionDef) else "var"
                frame.aliases.pop(t.id, None)
            if len(stmt.targets) == 1 and len(stmt.values) == 1:
                mod = _module_of(stmt.values[0])
                if mod is None:
                    static = ast.static_name(stmt.values[0])
                    if static and "." in static and self._is_global_root(static):
                        mod = self._resolve_name(static)[0]
                if mod:
                    frame.aliases[stmt.targets[0].id] = mod
            defs = [(t.id, info) for t, info in zip(stmt.targets, infos)]
            node = self._node(cfg, ASSIGNMENT, stmt, frontier, defs=defs)
            if surplus.free or surplus.calls:
                node.expr = surplus
            return [node.id]
        if isinstance(stmt, ast.Assign):
            infos, extra = self._values_for(stmt.targets, stmt.values)
            defs = []
            for t, info in zip(stmt.targets, infos):
                ident, key_info = self._target_identity(t)
                defs.append((ident, info))
                extra = extra.merge(key_info)
            node = self._node(cfg, ASSIGNMENT, stmt, frontier, defs=defs)
            if extra.free or extra.calls:
                node.expr = extra
            return [node.id]
        if isinstance(stmt, (ast.Call, ast.MethodCall)):
            info = self._expr(stmt)
            return [self._node(cfg, CALLSITE, stmt, frontier, expr=info).id]
        if isinstance(stmt, ast.FunctionDef):
            return self._function_stmt(cfg, stmt, frontier)
        if isinstance(stmt, ast.Return):
            if len(stmt.values) == 1:
                info = self._expr(stmt.values[0])  # keeps alias/fields for field-sensitive returns
            else:
                info = ExprInfo()
                for v in stmt.values:
                    info = info.merge(self._expr(v))
            node = self._node(cfg, STATEMENT, stmt, frontier, expr=info, role="return")
            self._returns.setdefault(id(cfg), []).append(node.id)
            return []
        if isinstance(stmt, ast.Break):
            node = self._node(cfg, STATEMENT, stmt, frontier, label="break")
            if loop is None:
                cfg.diagnostics.append(("LoweringError", "break outside loop", stmt.span))
                return [node.id]
            loop.append(node.id)
            return []
        if isinstance(stmt, ast.Do):
            return self._block(cfg, stmt.body, frontier, loop)
        if isinstance(stmt, ast.If):
            return self._if(cfg, stmt, frontier, loop)
        if isinstance(stmt, ast.While):
            cond = self._node(cfg, CONDITION, stmt, frontier,
                              label="while " + _excerpt(self.text, stmt.cond.span),
                              expr=self._expr(stmt.cond))
            breaks: list[int] = []
            body_end = self._block(cfg, stmt.body, [cond.id], breaks)
            self._link(cfg, body_end, cond.id)
            return [cond.id] + breaks
        if isinstance(stmt, ast.Repeat):
            breaks = []
            before = cfg.next_id
            body_end = self._block(cfg, stmt.body, frontier, breaks)
            cond = self._node(cfg, CONDITION, stmt.cond, body_end,
                              label="until " + _excerpt(self.text, stmt.cond.span),
                              expr=self._expr(stmt.cond))
            head = before if before < cond.id else cond.id
            cfg.connect(cond.id, head)
            return [cond.id] + breaks
        if isinstance(stmt, ast.NumericFor):
            info = self._expr(stmt.start).merge(self._expr(stmt.stop))
            if stmt.step is not None:
                info = info.merge(self._expr(stmt.step))
            return self._loop(cfg, stmt, frontier, loop, [stmt.var.id], None, info)
        if isinstance(stmt, ast.GenericFor):
            info = ExprInfo()
            for e in stmt.exprs:
                info = info.merge(self._expr(e))
            return self._loop(cfg, stmt, frontier, loop, [n.id for n in stmt.names], None, info)
        cfg.diagnostics.append(("LoweringError", f"unmodeled statement {stmt.kind}", stmt.span))
        return [self._node(cfg, STATEMENT, stmt, frontier).id]

    def _loop(self, cfg, stmt, frontier, loop, names, infos, header_info) -> list[int]:
        header = _excerpt(self.text, stmt.span)
        # The loop control expressions are evaluated once, before the first
        # test; a hidden variable carries their value to the loop variables so
        # every call appears in exactly one node.
        hidden = f"$for{cfg.next_id}"
        init = self._node(cfg, ASSIGNMENT, stmt, frontier, label=header, role="loopinit",
                          defs=[(hidden, header_info)])
        cond = cfg.add(CONDITION, label=header, span=stmt.span, origin=cfg.name,
                       expr=ExprInfo(free={hidden}, alias=hidden))
        cfg.connect(init.id, cond.id)
        frame = self.frames[-1]
        frame.locals[hidden] = "var"
        for n in names:
            frame.locals[n] = "var"
        assign = cfg.add(
            ASSIGNMENT, label=header, span=stmt.span, origin=cfg.name, role="loopvar",
            defs=[(n, ExprInfo(free={hidden}, alias=hidden)) for n in names],
        )
        cfg.connect(cond.id, assign.id)
        breaks: list[int] = []
        body_end = self._block(cfg, stmt.body, [assign.id], breaks)
        self._link(cfg, body_end, cond.id)
        return [cond.id] + breaks

    def _if(self, cfg, stmt: ast.If, frontier, loop) -> list[int]:
        join_sources: list[int] = []
        current = frontier
        for i, (test, body) in enumerate(zip(stmt.tests, stmt.bodies)):
            word = "if" if i == 0 else "elseif"
            cond = self._node(cfg, CONDITION, test, current,
                              label=f"{word} {_excerpt(self.text, test.span)}",
                              expr=self._expr(test))
            end = self._block(cfg, body, [cond.id], loop)
            join_sources.extend(end)
            current = [cond.id]
        if stmt.orelse is not None:
            join_sources.extend(self._block(cfg, stmt.orelse, current, loop))
        else:
            join_sources.extend(current)
        if not join_sources:
            return []
        join = cfg.add(STATEMENT, label="end if", span=None, origin=cfg.name)
        self._link(cfg, join_sources, join.id)
        return [join.id]

    def _function_stmt(self, cfg, stmt: ast.FunctionDef, frontier) -> list[int]:
        frame = self.frames[-1]
        if stmt.is_local and isinstance(stmt.name, ast.Name):
            frame.locals[stmt.name.id] = "func"
        name = self._function_name(stmt, None)
        self._build_function(stmt, name)
        label = f"function {name}"
        return [self._node(cfg, STATEMENT, stmt, frontier, label=label).id]

    # -- expressions ------------------------------------------------------------

    def _values_for(self, targets, values, local: bool = False) -> tuple[list[ExprInfo], ExprInfo]:
        """Per-target value summaries plus the summary of surplus values."""
        infos = []
        for i, v in enumerate(values):
            bound = None
            if isinstance(v, ast.FunctionDef) and i < len(targets):
                bound = self._bound_function_name(targets[i], local)
            infos.append(self._expr(v, bound=bound))
        m = len(values)
        out = []
        for i in range(len(targets)):
            if i < m:
                out.append(infos[i])
            elif m and isinstance(values[-1], (ast.Call, ast.MethodCall, ast.Varargs)):
                # a trailing multi-value expression feeds every remaining target
                out.append(infos[-1])
            else:
                out.append(ExprInfo())
        surplus = ExprInfo()
        for info in infos[len(targets):]:
            surplus = surplus.merge(info)
        return out, surplus

    def _bound_function_name(self, target, local: bool) -> Optional[str]:
        if isinstance(target, ast.Name):
            for frame in reversed(self.frames):
                if local or target.id in frame.locals:
                    return f"{frame.prefix}.{target.id}" if frame.prefix else target.id
            return target.id
        return ast.static_name(target)

    def _target_identity(self, target) -> tuple[str, ExprInfo]:
        ident, info = self._path(target)
        if ident is None:
            return "$unknown" + DYN, info
        return ident, info

    def _path(self, node) -> tuple[Optional[str], ExprInfo]:
        """Identity named by a Name/Index chain, plus the uses of its key expressions.

        When the chain is not rooted at a name the identity is None and the
        returned summary covers the whole expression.
        """
        if isinstance(node, ast.Name):
            return node.id, ExprInfo()
        if isinstance(node, ast.Paren):
            return self._path(node.expr)
        if isinstance(node, ast.Index):
            base, info = self._path(node.obj)
            key = node.key
            static_key = isinstance(key, ast.StringLit) and _KEY_RE.match(key.value)
            if base is None:
                return None, info if static_key else info.merge(self._expr(key))
            if static_key:
                return f"{base}.{key.value}", info
            return base + DYN, info.merge(self._expr(key))
        return None, self._expr(node)

    def _expr(self, e, bound: Optional[str] = None) -> ExprInfo:
        info = self._expr_inner(e, bound)
        info.text = _excerpt(self.text, e.span, 120)
        return info

    def _expr_inner(self, e, bound: Optional[str]) -> ExprInfo:
        if isinstance(e, ast.LITERALS):
            return ExprInfo()
        if isinstance(e, ast.Varargs):
            return ExprInfo(free={VARARGS}, alias=VARARGS)
        if isinstance(e, ast.Name):
            return ExprInfo(free={e.id}, alias=e.id)
        if isinstance(e, ast.Paren):
            return self._expr(e.expr)
        if isinstance(e, ast.Index):
            ident, keys = self._path(e)
            if ident is None:
                return keys
            return ExprInfo(free={ident} | keys.free, calls=keys.calls, alias=ident)
        if isinstance(e, (ast.Call, ast.MethodCall)):
            return ExprInfo(calls=[self._call(e)])
        if isinstance(e, ast.BinOp):
            return self._expr(e.left).merge(self._expr(e.right))
        if isinstance(e, ast.UnOp):
            return ExprInfo().merge(self._expr(e.operand))
        if isinstance(e, ast.TableConstructor):
            return self._table(e, bound)
        if isinstance(e, ast.FunctionDef):
            self._build_function(e, self._function_name(e, bound))
            return ExprInfo()
        raise LoweringError(f"unmodeled expression {e.kind}")

    def _table(self, e: ast.TableConstructor, bound: Optional[str]) -> ExprInfo:
        fields = {}
        rest = ExprInfo()
        for f in e.fields:
            if isinstance(f.key, ast.StringLit) and _KEY_RE.match(f.key.value):
                sub = f"{bound}.{f.key.value}" if bound and isinstance(f.value, ast.FunctionDef) else None
                fields[f.key.value] = self._expr(f.value, bound=sub)
            else:
                if f.key is not None:
                    rest = rest.merge(self._expr(f.key))
                rest = rest.merge(self._expr(f.value))
        merged = rest
        for v in fields.values():
            merged = merged.merge(v)
        return ExprInfo(merged.free, merged.calls, fields=fields, rest=rest)

    def _is_global_root(self, name: str) -> bool:
        head = name.split(".", 1)[0]
        return not any(head in f.locals or head in f.aliases for f in self.frames)

    def _resolve_name(self, raw: str) -> tuple[str, tuple]:
        """Resolve a static callee name to (qualified name, dictionary candidates).

        Local aliases of ``require``d modules are expanded so trigger words
        match; calls through plain local variables get no candidates.
        """
        head, _, rest = raw.partition(".")
        for frame in reversed(self.frames):
            if head in frame.aliases:
                full = frame.aliases[head] + ("." + rest if rest else "")
                return full, (full,)
            if head in frame.locals:
                if frame.locals[head] == "func" and not rest:
                    q = f"{frame.prefix}.{head}" if frame.prefix else head
                    return q, (q,)
                if head == "self" and frame.method_of and rest:
                    return raw, (f"{frame.method_of}.{rest}",)
                return raw, ((raw,) if rest else ())
        if head in self.global_aliases:
            full = self.global_aliases[head] + ("." + rest if rest else "")
            return full, (full,)
        return raw, (raw,)

    def _call(self, e) -> CallInfo:
        args = [self._expr(a) for a in e.args]
        scope = self.frames[-1].prefix
        raw = e.qualified_name
        if isinstance(e, ast.MethodCall):
            receiver = self._expr(e.obj)
            if raw is None:
                return CallInfo(None, args, e.span, method=e.method.id, receiver=receiver, scope=scope)
            name, cands = self._resolve_name(raw)
            return CallInfo(name, args, e.span, method=e.method.id, receiver=receiver,
                            candidates=cands, scope=scope)
        if raw is None:
            return CallInfo(None, args, e.span, func=self._expr(e.func), scope=scope)
        name, cands = self._resolve_name(raw)
        return CallInfo(name, args, e.span, candidates=cands, scope=scope)


def build_cfgs(chunk: ast.Chunk, text: str = "", path: str = "") -> list[Cfg]:
    """Lower a parsed chunk: the top-level Cfg first, then one per function."""
    builder = CfgBuilder(text, path or chunk.span.file)
    return builder.build(chunk)
