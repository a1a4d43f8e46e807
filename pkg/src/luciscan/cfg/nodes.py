"""Control-flow graph data model.

Variables are tracked as *identities*: a plain name (``cmd``), an attribute
path (``self.name``), or a dynamically indexed slot (``phy[]``). Expressions
are summarized as ``ExprInfo`` trees that keep just enough structure for
taint work: which identities are read, which calls happen and with what
arguments, and static table-constructor fields.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional

from ..frontend.ast import Span

ENTRY = "Entry"
EXIT = "Exit"
ASSIGNMENT = "Assignment"
STATEMENT = "Statement"
CONDITION = "Condition"
CALLSITE = "CallSite"
NODE_KINDS = (ENTRY, EXIT, ASSIGNMENT, STATEMENT, CONDITION, CALLSITE)

DYN = "[]"


@lru_cache(maxsize=65536)
def segments(identity: str) -> tuple[str, ...]:
    """``"t.a[].b"`` -> ``("t", "a", "[]", "b")``."""
    return tuple(p for p in identity.replace(DYN, "." + DYN).split(".") if p)


def root(identity: str) -> str:
    return segments(identity)[0]


@lru_cache(maxsize=262144)
def overlaps(a: str, b: str) -> bool:
    """True when a write to one identity may affect a read of the other.

    Paths overlap when one is a prefix of the other; a dynamic slot ``[]``
    overlaps any segment in its position.
    """
    sa, sb = segments(a), segments(b)
    for x, y in zip(sa, sb):
        if x != y and x != DYN and y != DYN:
            return False
    return True


def is_under(path: str, base: str) -> bool:
    """True when ``path`` is a strict sub-path of ``base``."""
    sp, sb = segments(path), segments(base)
    return len(sp) > len(sb) and sp[: len(sb)] == sb


def kills(defined: str, other: str) -> bool:
    """Whether a strong write of ``defined`` overwrites a prior def of ``other``.

    Writes through a dynamic slot are weak and kill nothing; writing a
    table or field kills its identical path and every path below it.
    """
    if DYN in segments(defined):
        return False
    return other == defined or is_under(other, defined)


def join_path(base: str, suffix: tuple[str, ...]) -> str:
    out = base
    for seg in suffix:
        out = out + DYN if seg == DYN else f"{out}.{seg}"
    return out


def rename_identity(identity: str, mapping: dict) -> str:
    r = root(identity)
    new = mapping.get(r)
    if new is None:
        return identity
    return new + identity[len(r):]


@dataclass
class CallInfo:
    name: Optional[str]  # resolved qualified name, None when computed
    args: list
    span: Optional[Span] = None
    method: Optional[str] = None  # method name for obj:m() calls
    receiver: Optional["ExprInfo"] = None
    func: Optional["ExprInfo"] = None  # callee expression when dynamic
    candidates: tuple = ()  # dictionary keys to try when resolving
    scope: str = ""
    inline_ret: Optional[str] = None
    opaque_reason: Optional[str] = None
    # True for a copy that only re-references the value of a call evaluated
    # elsewhere (parameter bindings of inlined calls); never a call site itself
    ref: bool = False

    def actuals(self) -> list:
        """Arguments in parameter order, the receiver first for ``obj:m()``."""
        return ([self.receiver] if self.receiver is not None else []) + list(self.args)

    def renamed(self, mapping: dict) -> "CallInfo":
        return CallInfo(
            name=self.name,
            args=[a.renamed(mapping) for a in self.args],
            span=self.span,
            method=self.method,
            receiver=None if self.receiver is None else self.receiver.renamed(mapping),
            func=None if self.func is None else self.func.renamed(mapping),
            candidates=self.candidates,
            scope=self.scope,
            inline_ret=None if self.inline_ret is None else rename_identity(self.inline_ret, mapping),
            opaque_reason=self.opaque_reason,
            ref=self.ref,
        )

    def as_ref(self) -> "CallInfo":
        c = self.renamed({})
        c.ref = True
        c.args = [a.as_ref() for a in c.args]
        if c.receiver is not None:
            c.receiver = c.receiver.as_ref()
        if c.func is not None:
            c.func = c.func.as_ref()
        return c


@dataclass
class ExprInfo:
    free: set = field(default_factory=set)  # identities read outside any call
    calls: list = field(default_factory=list)
    alias: Optional[str] = None  # set when the expression is exactly one identity
    fields: Optional[dict] = None  # static-key table constructor entries
    rest: Optional["ExprInfo"] = None  # positional/dynamic constructor entries
    text: str = ""

    @classmethod
    def empty(cls) -> "ExprInfo":
        return cls()

    def merge(self, other: "ExprInfo") -> "ExprInfo":
        return ExprInfo(self.free | other.free, self.calls + other.calls)

    def renamed(self, mapping: dict) -> "ExprInfo":
        return ExprInfo(
            free={rename_identity(u, mapping) for u in self.free},
            calls=[c.renamed(mapping) for c in self.calls],
            alias=None if self.alias is None else rename_identity(self.alias, mapping),
            fields=None if self.fields is None else {k: v.renamed(mapping) for k, v in self.fields.items()},
            rest=None if self.rest is None else self.rest.renamed(mapping),
            text=self.text,
        )

    def as_ref(self) -> "ExprInfo":
        """Copy whose calls are value references (see ``CallInfo.ref``)."""
        return ExprInfo(
            free=set(self.free),
            calls=[c.as_ref() for c in self.calls],
            alias=self.alias,
            fields=None if self.fields is None else {k: v.as_ref() for k, v in self.fields.items()},
            rest=None if self.rest is None else self.rest.as_ref(),
            text=self.text,
        )

    def value_uses(self, sanitizers=frozenset()) -> set:
        """Identities whose values may flow into this expression's value.

        Calls named in ``sanitizers`` contribute nothing; an inlined call
        contributes only its result shadow variable; any other call passes
        its receiver and arguments through.
        """
        out = set(self.free)
        for c in self.calls:
            out |= call_value_uses(c, sanitizers)
        return out

    def iter_calls(self) -> Iterator[CallInfo]:
        """Every call in the tree, innermost first (evaluation order)."""
        for c in self.calls:
            for sub in c.actuals():
                yield from sub.iter_calls()
            if c.func is not None:
                yield from c.func.iter_calls()
            yield c

    def value_calls(self, sanitizers=frozenset()) -> Iterator[CallInfo]:
        """Calls whose result reaches the value, stopping at sanitizers."""
        for c in self.calls:
            if c.name is not None and c.name in sanitizers:
                continue
            yield c
            if c.inline_ret is not None:
                continue
            for sub in c.actuals():
                yield from sub.value_calls(sanitizers)
            if c.func is not None:
                yield from c.func.value_calls(sanitizers)

    def is_constant(self) -> bool:
        return not self.free and not self.calls


def call_value_uses(c: CallInfo, sanitizers=frozenset()) -> set:
    if c.inline_ret is not None:
        return {c.inline_ret}
    if c.name is not None and c.name in sanitizers:
        return set()
    out = set()
    for sub in c.actuals():
        out |= sub.value_uses(sanitizers)
    if c.func is not None:
        out |= c.func.value_uses(sanitizers)
    return out


@dataclass(eq=False)
class CfgNode:
    id: int
    kind: str
    label: str = ""
    span: Optional[Span] = None
    predecessors: set = field(default_factory=set)
    successors: set = field(default_factory=set)
    defs: list = field(default_factory=list)  # [(identity, ExprInfo)] for assignments
    expr: Optional[ExprInfo] = None  # evaluated value for conditions, calls, returns
    origin: str = ""  # qualified name of the function the source text belongs to
    role: str = ""  # param | shadow | return | loopvar | "" for ordinary nodes
    depth: int = 0
    site: Optional[int] = None  # inline site that produced this copy

    @property
    def lh(self) -> list[str]:
        return [ident for ident, _ in self.defs]

    @property
    def exprs(self) -> list[ExprInfo]:
        out = [e for _, e in self.defs]
        if self.expr is not None:
            out.append(self.expr)
        return out

    def uses(self, sanitizers=frozenset()) -> set:
        out = set()
        for e in self.exprs:
            out |= e.value_uses(sanitizers)
        return out

    @property
    def rh(self) -> list[str]:
        called = sorted({c.name for c in self.iter_calls() if c.name})
        return sorted(self.uses()) + called

    def iter_calls(self) -> Iterator[CallInfo]:
        seen = set()
        for e in self.exprs:
            for c in e.iter_calls():
                if id(c) not in seen:
                    seen.add(id(c))
                    yield c

    def __repr__(self) -> str:
        return f"<{self.kind} #{self.id} {self.label!r}>"


@dataclass(eq=False)
class Cfg:
    name: str
    nodes: list = field(default_factory=list)
    entry_id: int = 0
    exit_id: int = 0
    source_path: str = ""
    params: list = field(default_factory=list)
    local_names: set = field(default_factory=set)
    span: Optional[Span] = None
    is_chunk: bool = False
    is_local: bool = False
    web_reachable: bool = False
    next_id: int = 0
    next_site: int = 1
    diagnostics: list = field(default_factory=list)
    # inline site -> (enclosing site or None, callee name, callee path, callee span)
    sites: dict = field(default_factory=dict)
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {n.id: n for n in self.nodes}

    def node(self, node_id: int) -> CfgNode:
        return self._index[node_id]

    def __getitem__(self, node_id: int) -> CfgNode:
        return self._index[node_id]

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._index

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def entry(self) -> CfgNode:
        return self._index[self.entry_id]

    @property
    def exit(self) -> CfgNode:
        return self._index[self.exit_id]

    def add(self, kind: str, **kw) -> CfgNode:
        node = CfgNode(self.next_id, kind, **kw)
        self.next_id += 1
        self.nodes.append(node)
        self._index[node.id] = node
        return node

    def connect(self, a: int, b: int) -> None:
        self._index[a].successors.add(b)
        self._index[b].predecessors.add(a)

    def disconnect(self, a: int, b: int) -> None:
        self._index[a].successors.discard(b)
        self._index[b].predecessors.discard(a)

    def remove(self, node_id: int) -> None:
        node = self._index.pop(node_id)
        for p in list(node.predecessors):
            self.disconnect(p, node_id)
        for s in list(node.successors):
            if s in self._index:
                self._index[s].predecessors.discard(node_id)
        self.nodes.remove(node)

    def assignments(self) -> list[CfgNode]:
        return [n for n in self.nodes if n.kind == ASSIGNMENT]

    def copy(self) -> "Cfg":
        return copy.deepcopy(self)

    def reverse_postorder(self) -> list[int]:
        """Node ids in reverse postorder from Entry; unreachable ids appended."""
        seen = set()
        order = []
        stack = [(self.entry_id, iter(sorted(self.entry.successors)))]
        seen.add(self.entry_id)
        while stack:
            nid, it = stack[-1]
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(sorted(self._index[s].successors))))
                    break
            else:
                stack.pop()
                order.append(nid)
        order.reverse()
        order.extend(n.id for n in self.nodes if n.id not in seen)
        return order

    def site_path(self, site) -> list:
        """Callee records from the outermost inline site down to ``site``."""
        out = []
        while site is not None and site in self.sites:
            parent, name, path, span = self.sites[site]
            out.append((name, path, span))
            site = parent
        out.reverse()
        return out

    def check(self) -> list[str]:
        """Structural invariant violations (empty when the graph is well formed)."""
        problems = []
        entries = [n for n in self.nodes if n.kind == ENTRY]
        exits = [n for n in self.nodes if n.kind == EXIT]
        if len(entries) != 1 or len(exits) != 1:
            problems.append("expected exactly one Entry and one Exit")
        if self.entry.predecessors or len(self.entry.successors) != 1:
            problems.append("Entry must have no predecessors and one successor")
        if self.exit.successors or not self.exit.predecessors:
            problems.append("Exit must have no successors and at least one predecessor")
        for n in self.nodes:
            for s in n.successors:
                if s not in self._index or n.id not in self._index[s].predecessors:
                    problems.append(f"edge {n.id}->{s} not mirrored")
            for p in n.predecessors:
                if p not in self._index or n.id not in self._index[p].successors:
                    problems.append(f"edge {p}->{n.id} not mirrored")
        reach = set(self.reverse_postorder()[: self._reachable_count()])
        for n in self.nodes:
            if n.id not in reach:
                problems.append(f"node {n.id} unreachable from Entry")
        return problems

    def _reachable_count(self) -> int:
        seen = {self.entry_id}
        stack = [self.entry_id]
        while stack:
            for s in self._index[stack.pop()].successors:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return len(seen)
