"""Sink-first taint detection on an inlined Cfg.

The engine works in three steps per sink argument:

1. ``backtrack_argument`` walks the argument's identities backward through
   reaching definitions, field-sensitively, and classifies its provenance as
   Constant, SourceTainted or Unknown.
2. ``propagate_taint`` runs the forward chain-building propagation from each
   source it found, collecting the chain members and tainted attribute paths.
3. The reported chain is the shortest def-use path from the sink back to the
   source that stays inside the forward chain.

Flows found only when sanitizer calls are ignored are sanitized flows; they
are returned separately so callers can count and suppress them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..cfg.nodes import (
    ASSIGNMENT, DYN, CallInfo, Cfg, ExprInfo, join_path, overlaps, segments,
)
from ..dataflow import ConstraintTable, _analyze_bits, _Problem
from .triggers import Sink, TriggerWords

CONSTANT = "Constant"
SOURCE_TAINTED = "SourceTainted"
UNKNOWN = "Unknown"

MAX_PATH_SEGMENTS = 8


@dataclass(frozen=True)
class SinkSite:
    node_id: int
    call: CallInfo = field(compare=False, hash=False)
    sink: Sink = None
    span: object = field(default=None, compare=False, hash=False)

    @property
    def name(self) -> str:
        """Trigger name, or ``receiver:method`` as written for method-pattern sinks."""
        if not self.sink.is_method_pattern or not self.call.name:
            return self.sink.name
        head, _, method = self.call.name.rpartition(".")
        return f"{head}:{method}" if head else self.call.name


@dataclass(frozen=True)
class SourceLeaf:
    node_id: int
    name: str  # trigger word for call sources, parameter name for parameter sources
    kind: str  # "call" | "param"
    span: object = field(default=None, compare=False, hash=False)


@dataclass
class Provenance:
    kind: str
    sources: list = field(default_factory=list)
    unknown: list = field(default_factory=list)  # identities with no reaching definition


@dataclass
class TaintFlow:
    root: str
    file: str
    source: SourceLeaf
    sink_node: int
    sink_name: str
    sink_span: object
    arg: int
    type: str
    chain: list  # assignment node ids from the source towards the sink
    tainted_attrs: set
    sanitized: bool = False
    web_reachable: bool = False
    framework: str = ""  # why the framework rules keep (or drop) the flow


def find_sinks(cfg: Cfg, tw: TriggerWords) -> list[SinkSite]:
    """Sink call sites of ``cfg``, in reverse node order (sink-first processing)."""
    out = []
    for node in cfg.nodes:
        for call in node.iter_calls():
            sink = tw.match_sink(call)
            if sink is not None:
                out.append(SinkSite(node.id, call, sink, call.span))
    out.reverse()
    return out


def classify(sink: Sink) -> str:
    return sink.type


def sink_argument(site: SinkSite, position: int) -> Optional[ExprInfo]:
    args = site.call.args
    return args[position - 1] if 1 <= position <= len(args) else None


class TaintAnalyzer:
    """Reaching definitions, reachability and taint queries for one Cfg."""

    def __init__(self, cfg: Cfg, tw: TriggerWords, ct: Optional[ConstraintTable] = None):
        self.cfg = cfg
        self.tw = tw
        self.problem = _Problem(cfg)
        if ct is None:
            self._bits = _analyze_bits(cfg, self.problem)
            self._in_cache: dict[int, tuple] = {}
        else:
            self._bits = {nid: self.problem.to_bits(s) for nid, s in ct.items()}
            self._in_cache = {}
        self._reach: dict[int, set] = {}
        self._rpo_assignments = None

    # -- lattice queries --------------------------------------------------------

    def reaching(self, node_id: int) -> tuple:
        """Assignment node ids reaching the point just before ``node_id``, sorted."""
        got = self._in_cache.get(node_id)
        if got is None:
            bits = 0
            for p in self.cfg[node_id].predecessors:
                bits |= self._bits[p]
            got = tuple(sorted(self.problem.to_set(bits)))
            self._in_cache[node_id] = got
        return got

    def reachable(self, a: int, b: int) -> bool:
        """``b`` is forward-reachable from ``a`` by a path of at least one edge."""
        got = self._reach.get(a)
        if got is None:
            got = set()
            stack = list(self.cfg[a].successors)
            while stack:
                x = stack.pop()
                if x not in got:
                    got.add(x)
                    stack.extend(self.cfg[x].successors)
            self._reach[a] = got
        return b in got

    def assignments_rpo(self) -> list[int]:
        if self._rpo_assignments is None:
            self._rpo_assignments = [i for i in self.cfg.reverse_postorder()
                                     if self.cfg[i].kind == ASSIGNMENT]
        return self._rpo_assignments

    # -- backtracking -----------------------------------------------------------

    def backtrack(self, node_id: int, expr: ExprInfo, honor_sanitizers: bool = True):
        """Provenance of ``expr`` evaluated at ``node_id`` plus the def-use edges walked."""
        sanitizers = self.tw.sanitizer_set if honor_sanitizers else frozenset()
        edges: dict[int, set] = {}
        sources: dict[SourceLeaf, None] = {}
        unknown: dict[str, None] = {}
        seen: set = set()
        queue: deque = deque()

        def visit_expr(at: int, e: ExprInfo, suffix: tuple) -> None:
            if suffix:
                if e.fields is not None:
                    head = suffix[0]
                    if head == DYN:
                        subs = list(e.fields.values())
                    else:
                        subs = [e.fields[head]] if head in e.fields else []
                    if e.rest is not None:
                        subs.append(e.rest)
                    for sub in subs:
                        visit_expr(at, sub, suffix[1:])
                    return
                target = e.alias
                if target is None and not e.free and len(e.calls) == 1 and e.calls[0].inline_ret:
                    target = e.calls[0].inline_ret
                if target is not None:
                    push(at, join_path(target, suffix))
                    return
            for u in e.value_uses(sanitizers):
                push(at, u)
            for c in e.value_calls(sanitizers):
                if self.tw.is_source(c):
                    sources[SourceLeaf(at, c.name, "call", c.span)] = None

        def push(at: int, path: str) -> None:
            segs = segments(path)
            if len(segs) > MAX_PATH_SEGMENTS:
                path = join_path(segs[0], segs[1:MAX_PATH_SEGMENTS])
            state = (at, path)
            if state not in seen:
                seen.add(state)
                queue.append(state)

        visit_expr(node_id, expr, ())
        cfg = self.cfg
        while queue:
            at, path = queue.popleft()
            sp = segments(path)
            found = False
            for w in self.reaching(at):
                wn = cfg[w]
                for d, e in wn.defs:
                    if not overlaps(d, path):
                        continue
                    found = True
                    edges.setdefault(at, set()).add(w)
                    if wn.role == "param" and wn.depth == 0:
                        sources[SourceLeaf(w, d, "param", cfg.span)] = None
                        continue
                    sd = segments(d)
                    visit_expr(w, e, sp[len(sd):] if len(sd) <= len(sp) else ())
            if not found:
                unknown[path] = None
        if sources:
            kind = SOURCE_TAINTED
        elif unknown:
            kind = UNKNOWN
        else:
            kind = CONSTANT
        return Provenance(kind, list(sources), list(unknown)), edges

    # -- forward propagation ----------------------------------------------------

    def source_taint(self, source: SourceLeaf, honor_sanitizers: bool = True) -> set:
        """Identities tainted directly by the source node."""
        node = self.cfg[source.node_id]
        if source.kind == "param":
            return {source.name}
        sanitizers = self.tw.sanitizer_set if honor_sanitizers else frozenset()
        out = set()
        for d, e in node.defs:
            if any(self.tw.is_source(c) and c.name == source.name for c in e.value_calls(sanitizers)):
                out.add(d)
        return out

    def propagate(self, source: SourceLeaf, honor_sanitizers: bool = True,
                  assignments: Optional[list] = None) -> tuple[list, set]:
        """Forward chain building from ``source`` over the assignment list.

        A node joins the chain when some chain member reaches it, one of the
        node's reads matches that member's definitions, and the read touches
        a tainted attribute path. Its definitions then become tainted
        (``trace_tainted_attr``). Passes repeat until nothing changes so
        loop-carried flows are included.
        """
        sanitizers = self.tw.sanitizer_set if honor_sanitizers else frozenset()
        order = self.assignments_rpo() if assignments is None else assignments
        chain = [source.node_id]
        in_chain = {source.node_id}
        tainted = set(self.source_taint(source, honor_sanitizers))
        cfg = self.cfg
        changed = True
        while changed:
            changed = False
            for nid in order:
                if nid in in_chain:
                    continue
                node = cfg[nid]
                uses = node.uses(sanitizers)
                if not uses:
                    continue
                if not self._extends(nid, uses, chain, tainted):
                    continue
                gained = trace_tainted_attr(node, tainted, sanitizers)
                if not gained:
                    continue
                tainted |= gained
                chain.append(nid)
                in_chain.add(nid)
                changed = True
        return chain, tainted

    def _extends(self, nid: int, uses: set, chain: list, tainted: set) -> bool:
        # same conjunction as "reaches, reads its defs, touches taint", cheapest test first
        live = [u for u in uses if _touches(u, tainted)]
        if not live:
            return False
        cfg = self.cfg
        for other in chain:
            lh = cfg[other].lh
            if any(overlaps(u, l) for u in live for l in lh) and self.reachable(other, nid):
                return True
        return False


def _touches(path: str, tainted: set) -> bool:
    return any(overlaps(path, t) for t in tainted)


def _covers(path: str, tainted: set) -> bool:
    """The whole value read through ``path`` is tainted."""
    sp = segments(path)
    for t in tainted:
        st = segments(t)
        if len(st) <= len(sp) and overlaps(path, t):
            return True
    return False


def trace_tainted_attr(node, tainted: set, sanitizers=frozenset()) -> set:
    """Attribute paths of ``node``'s definitions that carry taint (possibly already tainted)."""
    gained = set()
    for d, e in node.defs:
        gained |= _expr_taint(d, e, tainted, sanitizers)
    return gained


def _expr_taint(target: str, e: ExprInfo, tainted: set, sanitizers) -> set:
    if e.fields is not None:
        out = set()
        for key, sub in e.fields.items():
            out |= _expr_taint(f"{target}.{key}", sub, tainted, sanitizers)
        if e.rest is not None:
            out |= _expr_taint(target + DYN, e.rest, tainted, sanitizers)
        return out
    alias = e.alias
    if alias is None and not e.free and len(e.calls) == 1 and e.calls[0].inline_ret:
        alias = e.calls[0].inline_ret
    if alias is not None:
        if _covers(alias, tainted):
            return {target}
        sa = segments(alias)
        out = set()
        for t in tainted:
            st = segments(t)
            if len(st) > len(sa) and overlaps(alias, t):
                out.add(join_path(target, st[len(sa):]))
        return out
    if any(_touches(u, tainted) for u in e.value_uses(sanitizers)):
        return {target}
    return set()


def backtrack_argument(analyzer: TaintAnalyzer, site: SinkSite, position: int,
                       honor_sanitizers: bool = True) -> Provenance:
    arg = sink_argument(site, position)
    if arg is None:
        return Provenance(CONSTANT)
    prov, _ = analyzer.backtrack(site.node_id, arg, honor_sanitizers)
    return prov


def propagate_taint(analyzer: TaintAnalyzer, source: SourceLeaf, assignments=None,
                    honor_sanitizers: bool = True) -> tuple[list, set]:
    return analyzer.propagate(source, honor_sanitizers, assignments)


def shortest_chain(edges: dict, sink_node: int, source_node: int, allowed: set) -> Optional[list]:
    """Shortest def-use path sink -> source through ``allowed``; returned source first."""
    if sink_node == source_node:
        return [source_node]
    parent = {sink_node: None}
    queue = deque([sink_node])
    while queue:
        x = queue.popleft()
        for w in sorted(edges.get(x, ())):
            if w in parent or w not in allowed:
                continue
            parent[w] = x
            if w == source_node:
                path = []
                cur = w
                while cur is not None and cur != sink_node:
                    path.append(cur)
                    cur = parent[cur]
                return path
            queue.append(w)
    return None


def is_sanitized(flow: TaintFlow, cfg: Cfg, tw: TriggerWords) -> bool:
    """Whether some chain assignment applies a sanitizer to a tainted identity."""
    for nid in flow.chain:
        node = cfg[nid]
        for _, e in node.defs:
            for c in e.iter_calls():
                if c.name in tw.sanitizer_set:
                    arg_uses = set()
                    for a in c.actuals():
                        arg_uses |= a.value_uses()
                    if any(_touches(u, flow.tainted_attrs) for u in arg_uses):
                        return True
    return False


def analyze_flows(cfg: Cfg, tw: TriggerWords, root_name: Optional[str] = None,
                  ct: Optional[ConstraintTable] = None) -> tuple[list, list]:
    """All (unsanitized, sanitized) flows in an inlined Cfg.

    One flow per (sink site, argument, source); among several chains the
    shortest is kept.
    """
    sites = find_sinks(cfg, tw)
    if not sites:
        return [], []
    analyzer = TaintAnalyzer(cfg, tw, ct)
    root = root_name or cfg.name
    flows: dict = {}
    sanitized: dict = {}
    prop_cache: dict = {}
    for site in sites:
        for pos in site.sink.args:
            arg = sink_argument(site, pos)
            if arg is None:
                continue
            for honor in (True, False):
                prov, edges = analyzer.backtrack(site.node_id, arg, honor)
                if prov.kind != SOURCE_TAINTED:
                    continue
                for src in prov.sources:
                    key = (site.node_id, id(site.call), pos, src.node_id, src.name)
                    if key in flows or (not honor and key in sanitized):
                        continue
                    pkey = (src, honor)
                    if pkey not in prop_cache:
                        prop_cache[pkey] = analyzer.propagate(src, honor)
                    chain_nodes, attrs = prop_cache[pkey]
                    allowed = set(chain_nodes)
                    path = shortest_chain(edges, site.node_id, src.node_id, allowed)
                    if path is None:
                        continue
                    flow = TaintFlow(
                        root=root, file=cfg.source_path, source=src, sink_node=site.node_id,
                        sink_name=site.name, sink_span=site.span, arg=pos, type=site.sink.type,
                        chain=path, tainted_attrs=set(attrs), sanitized=not honor,
                    )
                    (flows if honor else sanitized)[key] = flow
    return list(flows.values()), list(sanitized.values())
