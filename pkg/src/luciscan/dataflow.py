"""Reaching-definitions analysis over a single Cfg.

The lattice element of a node is the set of Assignment nodes whose
definitions may reach the point just after it (its OUT set). ``join``
unions the predecessors' sets; ``transfer`` removes the definitions an
assignment overwrites and adds the assignment itself, and is the identity
for every other node kind. ``analyze`` runs the FIFO worklist iteration to
the least fixed point. Internally sets are bitsets over the Cfg's
assignment nodes.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Optional

from .cfg.nodes import ASSIGNMENT, DYN, Cfg, segments

ConstraintTable = dict  # node id -> frozenset of assignment node ids


class IterationBudgetExceeded(RuntimeError):
    pass


def _killed_identities(defined: str, identities_by_root: dict) -> set:
    segs = segments(defined)
    if DYN in segs:
        return set()  # weak update
    out = set()
    n = len(segs)
    for ident in identities_by_root.get(segs[0], ()):
        s = segments(ident)
        if len(s) >= n and s[:n] == segs:
            out.add(ident)
    return out


class _Problem:
    """Gen/kill bitsets for one Cfg."""

    def __init__(self, cfg: Cfg):
        self.cfg = cfg
        self.assigns = [n for n in cfg.nodes if n.kind == ASSIGNMENT]
        self.index = {n.id: i for i, n in enumerate(self.assigns)}
        lh_sets = [frozenset(n.lh) for n in self.assigns]
        by_ident: dict[str, int] = {}
        by_root: dict[str, set] = {}
        for i, lh in enumerate(lh_sets):
            for ident in lh:
                by_ident[ident] = by_ident.get(ident, 0) | (1 << i)
                by_root.setdefault(segments(ident)[0], set()).add(ident)
        self.kill: dict[int, int] = {}
        cache: dict[str, set] = {}
        for i, n in enumerate(self.assigns):
            killed: set = set()
            for d in n.lh:
                if d not in cache:
                    cache[d] = _killed_identities(d, by_root)
                killed |= cache[d]
            candidates = 0
            for ident in killed:
                candidates |= by_ident[ident]
            mask = 0
            # a multiple assignment is killed only when all of its targets are
            while candidates:
                low = candidates & -candidates
                j = low.bit_length() - 1
                if lh_sets[j] <= killed:
                    mask |= low
                candidates ^= low
            self.kill[n.id] = mask

    def to_set(self, bits: int) -> frozenset:
        out = []
        while bits:
            low = bits & -bits
            out.append(self.assigns[low.bit_length() - 1].id)
            bits ^= low
        return frozenset(out)

    def to_bits(self, ids: Iterable[int]) -> int:
        bits = 0
        for i in ids:
            bits |= 1 << self.index[i]
        return bits

    def transfer_bits(self, node_id: int, joined: int) -> int:
        i = self.index.get(node_id)
        if i is None:
            return joined
        return (joined & ~self.kill[node_id]) | (1 << i)


def join(v: int, ct: ConstraintTable, cfg: Cfg) -> set:
    """Union of the predecessors' sets; empty for Entry."""
    out: set = set()
    for p in cfg[v].predecessors:
        out |= ct.get(p, frozenset())
    return out


def transfer(v: int, joined: set, cfg: Cfg, _problem: Optional[_Problem] = None) -> set:
    """Kill the definitions ``v`` overwrites and add ``v`` (assignments only)."""
    node = cfg[v]
    if node.kind != ASSIGNMENT:
        return set(joined)
    problem = _problem or _Problem(cfg)
    bits = problem.transfer_bits(v, problem.to_bits(joined))
    return set(problem.to_set(bits))


def analyze(cfg: Cfg, order: Optional[Iterable[int]] = None, stats: Optional[dict] = None) -> ConstraintTable:
    """Worklist fixed point; ``order`` sets the initial queue (default node order)."""
    problem = _Problem(cfg)
    bits = _analyze_bits(cfg, problem, order, stats)
    return {nid: problem.to_set(b) for nid, b in bits.items()}


def _analyze_bits(cfg: Cfg, problem: _Problem, order=None, stats=None) -> dict:
    ct = {n.id: 0 for n in cfg.nodes}
    preds = {n.id: tuple(n.predecessors) for n in cfg.nodes}
    succs = {n.id: tuple(sorted(n.successors)) for n in cfg.nodes}
    queue = deque(order if order is not None else (n.id for n in cfg.nodes))
    queued = set(queue)
    budget = max(1, len(cfg.nodes)) ** 2 * max(1, len(problem.assigns))
    iterations = 0
    while queue:
        v = queue.popleft()
        queued.discard(v)
        iterations += 1
        if iterations > budget:
            raise IterationBudgetExceeded(f"{cfg.name}: more than {budget} worklist iterations")
        joined = 0
        for p in preds[v]:
            joined |= ct[p]
        new = problem.transfer_bits(v, joined)
        if new != ct[v]:
            ct[v] = new
            for s in succs[v]:
                if s not in queued:
                    queued.add(s)
                    queue.append(s)
    if stats is not None:
        stats["iterations"] = iterations
    return ct


def reaching_in(v: int, ct: ConstraintTable, cfg: Cfg) -> frozenset:
    """Definitions reaching the point just before ``v``."""
    return frozenset(join(v, ct, cfg))


def dump_reaching(cfg: Cfg, ct: ConstraintTable) -> str:
    """``node id -> sorted assignment ids``, one line per node."""
    lines = [f"# {cfg.name} ({cfg.source_path})"]
    for n in cfg.nodes:
        ids = ", ".join(str(i) for i in sorted(ct[n.id]))
        lines.append(f"{n.id} [{n.kind}] -> {{{ids}}}")
    return "\n".join(lines) + "\n"
