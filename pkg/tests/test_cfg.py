"""CFG lowering, function dictionary, dispatcher entries and inlining."""

from __future__ import annotations

import pytest

from luciscan.cfg import (
    ASSIGNMENT, CALLSITE, CONDITION, ENTRY, EXIT, attach_dispatched, build_cfgs,
    build_function_dictionary, expand, extract_dispatch_entries, inline_call, is_controller_path, to_dot,
)
from luciscan.cfg.inline import DEPTH_EXCEEDED, UNRESOLVED, InlineError
from luciscan.cfg.nodes import kills, overlaps
from luciscan.frontend import parse_chunk

from conftest import lower, node_labelled


def kinds(cfg):
    return [n.kind for n in cfg.nodes]


# -- builder ------------------------------------------------------------------------


def test_if_is_a_diamond():
    cfg = lower("if c then x=1 end")["<chunk>"]
    cond = node_labelled(cfg, "if c")
    assert cond.kind == CONDITION and len(cond.successors) == 2
    assign = node_labelled(cfg, "x=1")
    join = cfg[next(iter(assign.successors))]
    assert join.id in cond.successors and len(join.predecessors) == 2


def test_repeat_back_edge():
    cfg = lower("repeat x=x+1 until x>3")["<chunk>"]
    body, cond = node_labelled(cfg, "x=x+1"), node_labelled(cfg, "until")
    assert body.kind == ASSIGNMENT and cond.kind == CONDITION
    assert cond.id in body.successors
    assert body.id in cond.successors and len(cond.successors) == 2


def test_while_back_edge_and_break():
    cfg = lower("while c do if d then break end x = 1 end y = 2")["<chunk>"]
    cond = node_labelled(cfg, "while c")
    x, y = node_labelled(cfg, "x = 1"), node_labelled(cfg, "y = 2")
    assert cond.id in x.successors  # back edge
    assert y.id in cond.successors  # loop exit
    brk = [n for n in cfg.nodes if "break" in n.label]
    assert brk and y.id in brk[0].successors


def test_empty_while_body_direct_edge():
    cfg = lower("while x do end")["<chunk>"]
    cond = node_labelled(cfg, "while x")
    assert cond.id in cond.successors or any(cond.id in cfg[s].successors for s in cond.successors)
    assert cfg.exit_id in {s for n in cfg.nodes for s in n.successors}


def test_return_goes_to_exit():
    cfg = lower("function f(a) if a then return 1 end return 2 end")["f"]
    rets = [n for n in cfg.nodes if n.role == "return"]
    assert len(rets) == 2 and all(cfg.exit_id in r.successors for r in rets)


def test_one_cfg_per_function_plus_chunk():
    cfgs = lower("local function a() end\nfunction b.c() end\nfunction T:m() end\nx = function() end\n"
                 "table.sort(t, function(p, q) return p < q end)")
    assert set(cfgs) >= {"<chunk>", "a", "b.c", "T.m", "x"}  # a function value is named by its target
    assert any(n.startswith("<anon:t.lua:5") for n in cfgs)
    assert cfgs["T.m"].params[0] == "self"


def test_listing3_tophy_for_contains_callsite(reference_text):
    cfgs = lower(reference_text("listing3_bridge.lua"), "bridge.lua")
    tophy = cfgs["tophy"]
    loop = node_labelled(tophy, "for k,v in ipairs(ifname)")
    calls = [n for n in tophy.nodes if any(c.name == "get_device_byif" for c in n.iter_calls())]
    assert len(calls) == 1
    # the call sits inside the loop: the loop condition reaches it and it reaches the condition again
    assert loop.kind in (ASSIGNMENT, CONDITION)
    cond = [n for n in tophy.nodes if n.kind == CONDITION][0]

    def reach(a, b):
        seen, stack = set(), [a]
        while stack:
            x = stack.pop()
            for s in tophy[x].successors:
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return b in seen

    assert reach(cond.id, calls[0].id) and reach(calls[0].id, cond.id)


def test_field_definitions_and_aliases():
    cfg = lower("local t = {a = x, b = 1}\nt.c = y\nlocal u = t\nu.a = z")["<chunk>"]
    n = node_labelled(cfg, "local t")
    assert n.lh == ["t"] and set(n.defs[0][1].fields) == {"a", "b"}
    assert node_labelled(cfg, "t.c = y").lh == ["t.c"]
    assert node_labelled(cfg, "local u = t").defs[0][1].alias == "t"
    assert node_labelled(cfg, "u.a = z").lh == ["u.a"]


def test_dynamic_index_is_weak_identity():
    cfg = lower("t[k] = v")["<chunk>"]
    (node,) = [n for n in cfg.nodes if n.kind == ASSIGNMENT]
    assert node.lh == ["t[]"]
    assert not kills("t[]", "t[]")


def test_path_kill_relation():
    assert kills("t", "t.f") and kills("t.f", "t.f.g") and kills("x", "x")
    assert not kills("t.f", "t.g") and not kills("t.f", "t")
    assert overlaps("t", "t.f") and overlaps("t.f", "t") and not overlaps("t.f", "t.g")


def test_cfg_check_is_clean_for_corpus_shapes(reference_text):
    for name in ("listing2_bean.lua", "listing3_bridge.lua", "listing4_network.lua", "listing5_commands.lua"):
        for cfg in lower(reference_text(name), name).values():
            assert cfg.check() == [], (name, cfg.name)
            assert kinds(cfg)[0] == ENTRY and cfg.exit.kind == EXIT


def test_dot_output():
    dot = to_dot([lower("x = 1")["<chunk>"]])
    assert dot.startswith("digraph cfg {") and 'Assignment: x = 1' in dot and "->" in dot


# -- function dictionary ----------------------------------------------------------------


def _cfgs(files: dict):
    out = []
    for path, src in files.items():
        out.extend(build_cfgs(parse_chunk(src, path), src, path))
    return out


@pytest.mark.parametrize("approx", [True, False])
def test_dictionary_last_definition_wins(approx):
    cfgs = _cfgs({"a.lua": "function get_network() return 1 end",
                  "b.lua": "function get_network() return 2 end"})
    fd = build_function_dictionary(cfgs, approximate=approx)
    assert fd["get_network"].source_path == "b.lua"
    assert fd.instance_count == (1 if approx else 2)


def test_dictionary_empty():
    fd = build_function_dictionary([])
    assert len(fd) == 0 and fd.keys() == [] and fd.get("x") is None


def test_dictionary_listing3_keys(reference_text):
    fd = build_function_dictionary(lower(reference_text("listing3_bridge.lua")).values())
    assert set(fd.keys()) == {"get_device_byif", "tophy", "check_section_available", "add_br"}


def test_dictionary_qualifies_nested_and_anonymous():
    fd = build_function_dictionary(_cfgs({"m.lua": "function outer()\n local function inner() end\nend\n"
                                                   "pcall(function() end)"}))
    assert "outer" in fd and any(k.endswith("inner") and k != "inner" for k in fd.keys())
    assert any(k.startswith("<anon:m.lua:4>") for k in fd.keys())


# -- dispatcher -----------------------------------------------------------------------


def _entries(src, path="usr/lib/lua/luci/controller/x.lua"):
    diags = []
    return extract_dispatch_entries(parse_chunk(src, path), path, diags), diags


def test_entry_call_target():
    (e,), _ = _entries('entry({"admin","loogson","control"}, call("action_ctl"))')
    assert e.path_segments == ["admin", "loogson", "control"] and e.target == "action_ctl"
    assert e.function_target == "action_ctl" and not e.dynamic and e.controller


def test_no_entries():
    assert _entries("x = 1") == ([], [])


def test_dynamic_path():
    (e,), _ = _entries('entry(p, call("f"))')
    assert e.dynamic and e.function_target == "f"


def test_entry_variants():
    src = ('entry({"a"}, template("t"), _("Title"), 10)\n'
           'entry({"b", x}, action_ref).leaf = true\n'
           'node.entry({"c"}, function() end)\n'
           'entry()\n')
    entries, diags = _entries(src)
    assert [e.target_kind for e in entries] == ["template", "ref", "function"]
    assert entries[0].title == "Title" and entries[0].order == 10 and entries[0].function_target is None
    assert entries[1].dynamic_segments == [1]
    assert [d[0] for d in diags] == ["MalformedEntry"]


def test_controller_path():
    assert is_controller_path("usr/lib/lua/luci/controller/admin/network.lua")
    assert not is_controller_path("usr/lib/lua/luci/model/network.lua")
    assert not is_controller_path("controller.lua")


def test_attach_marks_dispatched_root():
    src = ('module("luci.controller.admin.status", package.seeall)\n'
           'function index()\n entry({"admin","status","realtime","bandwidth_status"}, call("action_bandwidth"))\nend\n'
           'function action_bandwidth(iface) end\n')
    path = "usr/lib/lua/luci/controller/admin/status.lua"
    cfgs = _cfgs({path: src})
    entries, _ = _entries(src, path)
    diags = []
    roots = attach_dispatched(cfgs, entries, build_function_dictionary(cfgs), diags)
    target = [c for c in roots if c.name == "action_bandwidth"]
    assert target and target[0].web_reachable and diags == []


def test_attach_without_entries_is_identity():
    cfgs = _cfgs({"a.lua": "function f() end"})
    assert attach_dispatched(cfgs, [], build_function_dictionary(cfgs)) == cfgs
    assert not any(c.web_reachable for c in cfgs)


def test_attach_missing_target():
    src = 'entry({"a"}, call("missing"))'
    cfgs = _cfgs({"c/controller/a.lua": src})
    entries, _ = _entries(src, "c/controller/a.lua")
    diags = []
    roots = attach_dispatched(cfgs, entries, build_function_dictionary(cfgs), diags)
    assert roots == cfgs and [d[0] for d in diags] == ["TargetNotFound"]


# -- inlining -------------------------------------------------------------------------


def test_parameter_binding_shadow():
    cfgs = lower("function f(x) g(x) end\nf(a)")
    fd = build_function_dictionary(cfgs.values())
    chunk = cfgs["<chunk>"]
    site = node_labelled(chunk, "f(a)").id
    out = inline_call(chunk, site, fd)
    shadow = node_labelled(out, "x#1 := a")
    assert shadow.kind == ASSIGNMENT and shadow.lh == ["x#1"] and shadow.role == "shadow"
    # the shadow precedes the copied body, which precedes the call node
    body = [n for n in out.nodes if n.site == 1 and n.kind == CALLSITE][0]
    assert body.id in shadow.successors and site in body.successors
    assert chunk is not out and len(chunk.nodes) < len(out.nodes)


def test_two_sites_two_instances():
    cfgs = lower("function f(x) local y = x end\nf(a)\nf(b)")
    out = expand(cfgs["<chunk>"], build_function_dictionary(cfgs.values()))
    first = {n.id for n in out.nodes if n.site == 1}
    second = {n.id for n in out.nodes if n.site == 2}
    assert first and second and not first & second
    assert {n.lh[0] for n in out.nodes if n.site in (1, 2) and n.role == ""} == {"y#1", "y#2"}
    assert len({n.id for n in out.nodes}) == len(out.nodes)


def test_unresolved_call_stays_opaque():
    cfgs = lower("os.execute(x)")
    out = expand(cfgs["<chunk>"], build_function_dictionary(cfgs.values()))
    assert [d[0] for d in out.diagnostics] == [UNRESOLVED]
    assert len(out.nodes) == len(cfgs["<chunk>"].nodes)


def test_negative_depth_rejected():
    cfgs = lower("f()")
    with pytest.raises(InlineError):
        expand(cfgs["<chunk>"], build_function_dictionary(cfgs.values()), -1)


def _oracle_node_count(cfgs: dict, root: str, max_depth: int) -> int:
    """Brute-force expansion size computed from the un-inlined graphs only."""
    fd = build_function_dictionary(cfgs.values())

    def calls(cfg):
        return [c for n in cfg.nodes for c in n.iter_calls() if not c.ref]

    def added(name, level):
        callee = fd[name]
        total = len(callee.nodes) - 2  # entry and exit are not copied
        for c in calls(callee):
            target = fd.resolve(c.candidates) if c.name else None
            if target is not None and level < max_depth:
                total += added(target.name, level + 1)
        return total

    base = cfgs[root]
    total = len(base.nodes)
    for c in calls(base):
        target = fd.resolve(c.candidates) if c.name else None
        if target is not None and 0 < max_depth:
            total += added(target.name, 1)
    return total


RECURSIVE = {
    "self": ("function f(n) f(n) end", "f"),
    "twice": ("function f(n) f(n) f(n .. 'x') end", "f"),
    "mutual": ("function f(n) local m = g(n) return m end\nfunction g(k) if k then return f(k) end return k end", "f"),
    "chain": ("function a(x) b(x) c(x) end\nfunction b(x) c(x) end\nfunction c(x) a(x) end\na(q)", "<chunk>"),
}


@pytest.mark.parametrize("name", sorted(RECURSIVE))
@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_inline_count_matches_bruteforce(name, depth):
    src, root = RECURSIVE[name]
    cfgs = lower(src)
    out = expand(cfgs[root], build_function_dictionary(cfgs.values()), depth)
    assert len(out.nodes) == _oracle_node_count(cfgs, root, depth)
    assert out.check() == []
    assert max(n.depth for n in out.nodes) <= depth


def test_recursion_left_opaque_at_depth_three():
    cfgs = lower("function f(n) f(n) end")
    out = expand(cfgs["f"], build_function_dictionary(cfgs.values()), 3)
    assert [d[0] for d in out.diagnostics] == [DEPTH_EXCEEDED]
    deepest = [n for n in out.nodes if n.depth == 3 and n.kind == CALLSITE]
    assert len(deepest) == 1
    assert all(c.opaque_reason == DEPTH_EXCEEDED for c in deepest[0].iter_calls())


def test_inline_return_value_and_site_path():
    cfgs = lower("local function get(k) return luci.http.formvalue(k) end\nfunction h() local v = get('a') end")
    out = expand(cfgs["h"], build_function_dictionary(cfgs.values()))
    ret = [n for n in out.nodes if n.role == "ret"]
    assert len(ret) == 1 and ret[0].lh == ["get$ret#1"]
    call = [c for n in out.nodes for c in n.iter_calls() if c.name == "get"][0]
    assert call.inline_ret == "get$ret#1"
    assert [p[0] for p in out.site_path(ret[0].site)] == ["get"]
