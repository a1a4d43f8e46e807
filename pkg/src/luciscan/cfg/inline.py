"""Per-call-site inlining with shadow variables.

Each resolvable call is replaced by a fresh, renamed copy of the callee
body spliced in front of the node that contains the call. Formal parameters
become shadow assignments ``<param>#<site>`` bound to the actual arguments,
callee locals are renamed with the same ``#<site>`` suffix, and every
``return`` becomes an assignment to ``<callee>$ret#<site>``, which the call
expression then reads in place of its arguments.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from .functions import FunctionDict
from .nodes import ASSIGNMENT, ENTRY, EXIT, CallInfo, Cfg, CfgNode, ExprInfo, rename_identity

DEFAULT_MAX_INLINE_DEPTH = 3

UNRESOLVED = "UnresolvedCallee"
DEPTH_EXCEEDED = "DepthExceeded"


class InlineError(Exception):
    pass


def ret_name(function_name: str, site: int) -> str:
    """Result shadow variable; dots are replaced so it stays a single path segment."""
    return function_name.replace(".", ":") + f"$ret#{site}"


def shadow_name(name: str, site: int) -> str:
    return f"{name}#{site}"


def _bind_actuals(callee: Cfg, call: CallInfo) -> dict[str, ExprInfo]:
    actuals = call.actuals()
    out = {}
    for i, p in enumerate(callee.params):
        if p == "$varargs":
            rest = ExprInfo()
            for a in actuals[i:]:
                rest = rest.merge(a)
            out[p] = rest
        elif i < len(actuals):
            out[p] = actuals[i]
        else:
            out[p] = ExprInfo()
    return out


def splice(cfg: Cfg, node: CfgNode, call: CallInfo, callee: Cfg) -> list[int]:
    """Inline ``callee`` for ``call`` (contained in ``node``) in place.

    Returns the ids of the new nodes in callee order.
    """
    site = cfg.next_site
    cfg.next_site += 1
    local_roots = set(callee.local_names) | set(callee.params)
    mapping = {n: shadow_name(n, site) for n in local_roots}
    retvar = ret_name(callee.name, site)
    bindings = _bind_actuals(callee, call)
    depth = node.depth + 1
    cfg.sites[site] = (node.site, callee.name, callee.source_path, callee.span)

    idmap: dict[int, int] = {}
    new_ids: list[int] = []
    for cn in callee.nodes:
        if cn.kind in (ENTRY, EXIT):
            continue
        if cn.role == "param":
            param = cn.defs[0][0]
            value = bindings[param].as_ref()
            shadow = mapping[param]
            label = f"{shadow} := {value.text or 'nil'}"
            new = cfg.add(ASSIGNMENT, label=label, span=call.span, defs=[(shadow, value)],
                          origin=callee.name, role="shadow", depth=depth, site=site)
        elif cn.role == "return":
            value = cn.expr.renamed(mapping) if cn.expr is not None else ExprInfo()
            new = cfg.add(ASSIGNMENT, label=f"{retvar} := {cn.label}", span=cn.span,
                          defs=[(retvar, value)], origin=cn.origin, role="ret",
                          depth=depth, site=site)
        else:
            new = cfg.add(
                cn.kind, label=cn.label, span=cn.span,
                defs=[(rename_identity(i, mapping), e.renamed(mapping)) for i, e in cn.defs],
                expr=None if cn.expr is None else cn.expr.renamed(mapping),
                origin=cn.origin, role=cn.role, depth=depth, site=site,
            )
        idmap[cn.id] = new.id
        new_ids.append(new.id)

    call.inline_ret = retvar
    head = next(iter(callee.entry.successors))
    if head == callee.exit_id:
        return new_ids  # empty callee: nothing to splice, result is nil

    for p in sorted(node.predecessors):
        cfg.disconnect(p, node.id)
        cfg.connect(p, idmap[head])
    for cn in callee.nodes:
        if cn.id in idmap:
            for s in cn.successors:
                cfg.connect(idmap[cn.id], node.id if s == callee.exit_id else idmap[s])
    return new_ids


def expand(
    cfg: Cfg,
    fdict: FunctionDict,
    max_depth: int = DEFAULT_MAX_INLINE_DEPTH,
    in_place: bool = False,
) -> Cfg:
    """Inline every resolvable call, to at most ``max_depth`` nested levels.

    Unresolvable calls and calls at the depth limit stay opaque and are
    recorded in ``cfg.diagnostics``.
    """
    if max_depth < 0:
        raise InlineError("max_inline_depth must be >= 0")
    out = cfg if in_place else cfg.copy()
    work = deque(n.id for n in out.nodes)
    while work:
        node = out[work.popleft()]
        for call in list(node.iter_calls()):
            if call.ref or call.inline_ret is not None or call.opaque_reason is not None:
                continue
            callee = fdict.resolve(call.candidates) if call.name is not None else None
            if callee is None:
                call.opaque_reason = UNRESOLVED
                out.diagnostics.append((UNRESOLVED, call.name or "<dynamic>", call.span))
                continue
            if node.depth >= max_depth:
                call.opaque_reason = DEPTH_EXCEEDED
                out.diagnostics.append((DEPTH_EXCEEDED, call.name, call.span))
                continue
            work.extend(splice(out, node, call, callee))
    return out


def inline_call(
    caller: Cfg,
    call_site: int,
    fdict: FunctionDict,
    depth: Optional[int] = None,
    call_index: int = 0,
    max_depth: int = DEFAULT_MAX_INLINE_DEPTH,
) -> Cfg:
    """Return a copy of ``caller`` with one call of node ``call_site`` inlined.

    ``depth`` overrides the nesting depth of the call site (defaults to the
    node's own depth). Unresolved or too-deep calls are left opaque and
    recorded in the copy's diagnostics.
    """
    out = caller.copy()
    node = out[call_site]
    calls = [c for c in node.iter_calls() if not c.ref and c.inline_ret is None]
    if call_index >= len(calls):
        raise InlineError(f"node {call_site} has no call #{call_index}")
    call = calls[call_index]
    callee = fdict.resolve(call.candidates) if call.name is not None else None
    level = node.depth if depth is None else depth
    if callee is None:
        call.opaque_reason = UNRESOLVED
        out.diagnostics.append((UNRESOLVED, call.name or "<dynamic>", call.span))
    elif level >= max_depth:
        call.opaque_reason = DEPTH_EXCEEDED
        out.diagnostics.append((DEPTH_EXCEEDED, call.name, call.span))
    else:
        saved = node.depth
        node.depth = level
        splice(out, node, call, callee)
        node.depth = saved
    return out
