"""Graphviz DOT rendering of control-flow graphs."""

from __future__ import annotations

from .nodes import Cfg


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(cfgs: list[Cfg]) -> str:
    """One ``digraph`` cluster per Cfg; node label = kind + source excerpt."""
    lines = ["digraph cfg {", "  node [shape=box, fontname=monospace];"]
    for i, cfg in enumerate(cfgs):
        lines.append(f"  subgraph cluster_{i} {{")
        lines.append(f"    label={_quote(cfg.name + ' (' + cfg.source_path + ')')};")
        for n in cfg.nodes:
            label = n.kind if not n.label else f"{n.kind}: {n.label}"
            lines.append(f"    c{i}_n{n.id} [label={_quote(label)}];")
        for n in cfg.nodes:
            for s in sorted(n.successors):
                lines.append(f"    c{i}_n{n.id} -> c{i}_n{s};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
