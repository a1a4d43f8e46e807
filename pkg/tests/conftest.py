"""Shared helpers: lowering snippets, staging file trees, locating fixture files."""

from __future__ import annotations

from pathlib import Path

import pytest

from luciscan.cfg import build_cfgs
from luciscan.frontend import parse_chunk
from luciscan.pipeline import ScanConfig, scan

FIXTURES = Path(__file__).parent / "fixtures"
REFERENCE = FIXTURES / "reference"

# listing fixture -> virtual path it is staged at (controller directories)
REFERENCE_STAGING = {
    "listing2_bean.lua": "usr/lib/lua/luci/controller/bean.lua",
    "listing3_bridge.lua": "usr/lib/lua/luci/controller/admin/bridge.lua",
    "listing4_network.lua": "usr/lib/lua/luci/controller/admin/network.lua",
    "listing5_commands.lua": "usr/lib/lua/luci/controller/commands.lua",
}


def lower(src: str, path: str = "t.lua") -> dict:
    """Parse and lower ``src``; returns {cfg name: Cfg}."""
    return {c.name: c for c in build_cfgs(parse_chunk(src, path), src, path)}


def nodes_labelled(cfg, fragment: str) -> list:
    return [n for n in cfg.nodes if fragment in n.label]


def node_labelled(cfg, fragment: str):
    found = nodes_labelled(cfg, fragment)
    assert found, f"no node with {fragment!r} in {cfg.name}: {[n.label for n in cfg.nodes]}"
    return found[0]


def stage(root: Path, files: dict) -> Path:
    for rel, text in files.items():
        p = Path(root) / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return Path(root)


def stage_reference(root: Path, names=tuple(REFERENCE_STAGING)) -> Path:
    return stage(root, {REFERENCE_STAGING[n]: (REFERENCE / n).read_text(encoding="utf-8") for n in names})


def scan_tree(root: Path, **kw):
    return scan(ScanConfig(str(root), **kw))


@pytest.fixture
def reference_text():
    return lambda name: (REFERENCE / name).read_text(encoding="utf-8")
