#!/usr/bin/env python3
"""Regenerate the shipped self-test corpus under src/luciscan/corpus.

Every fixture is a small LuCI-style Lua file plus a ``.expect.json`` sidecar.
For each vulnerability type there are vulnerable fixtures covering different
flow shapes, paired sanitized / constant-argument variants that must yield no
findings, and fixtures whose only flow is not web-reachable.

The sink line of each fixture is marked with a trailing ``-- sink`` comment,
which this script uses to compute the expected line numbers.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "luciscan" / "corpus"
REFERENCE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "reference"
CONTROLLER = "usr/lib/lua/luci/controller/corpus"
LIBRARY = "usr/lib/lua/luci/model/corpus"

TRIGGER_WORDS = {
    "sources": [
        "luci.http.formvalue", "luci.http.formvaluetable", "luci.http.content",
        "luci.http.getcookie", "luci.http.getenv", "os.getenv",
    ],
    "sinks": [
        {"name": "os.execute", "args": [1], "type": "CI"},
        {"name": "io.popen", "args": [1], "type": "CI"},
        {"name": "luci.sys.call", "args": [1], "type": "CI"},
        {"name": "luci.sys.exec", "args": [1], "type": "CI"},
        {"name": "luci.util.exec", "args": [1], "type": "CI"},
        {"name": "loadstring", "args": [1], "type": "RCE"},
        {"name": "load", "args": [1], "type": "RCE"},
        {"name": "dofile", "args": [1], "type": "RCE"},
        {"name": "loadfile", "args": [1], "type": "RCE"},
        {"name": "os.remove", "args": [1], "type": "PAT"},
        {"name": "os.rename", "args": [1, 2], "type": "PAT"},
        {"name": "io.open", "args": [1], "type": "PAT"},
        {"name": "nixio.fs.readfile", "args": [1], "type": "PAT"},
        {"name": "nixio.fs.unlink", "args": [1], "type": "PAT"},
        {"name": "*:execute", "args": [1], "type": "SQLI"},
        {"name": "*:exec", "args": [1], "type": "SQLI"},
        {"name": "*:nrows", "args": [1], "type": "SQLI"},
        {"name": "*:rows", "args": [1], "type": "SQLI"},
        {"name": "*:urows", "args": [1], "type": "SQLI"},
    ],
    "sanitizers": ["luci.util.shellquote", "tonumber", "nixio.fs.basename"],
}

# Per type: sink call templates (``{a}`` is the tainted argument), how the
# argument string is built from a value, optional per-function setup line,
# and the sanitizer that neutralizes it.
TYPES = {
    "CI": {
        "sinks": [("os.execute", "os.execute({a})"), ("io.popen", "io.popen({a}, \"r\")"),
                  ("luci.sys.call", "luci.sys.call({a})"), ("luci.sys.exec", "luci.sys.exec({a})"),
                  ("luci.util.exec", "luci.util.exec({a})")],
        "wrap": "\"ping -c 1 \" .. {v}",
        "fmt": "string.format(\"ping -c 1 %s\", {v})",
        "setup": None,
        "san": "luci.util.shellquote({v})",
    },
    "RCE": {
        "sinks": [("loadstring", "loadstring({a})()"), ("load", "load({a})"),
                  ("dofile", "dofile({a})"), ("loadfile", "loadfile({a})")],
        "wrap": "\"return \" .. {v}",
        "fmt": "string.format(\"return %s\", {v})",
        "setup": None,
        "san": "tonumber({v})",
    },
    "PAT": {
        "sinks": [("os.remove", "os.remove({a})"), ("io.open", "io.open({a}, \"r\")"),
                  ("nixio.fs.readfile", "nixio.fs.readfile({a})"), ("nixio.fs.unlink", "nixio.fs.unlink({a})"),
                  ("os.rename", "os.rename({a}, \"/tmp/trash\")")],
        "wrap": "\"/tmp/upload/\" .. {v}",
        "fmt": "string.format(\"/tmp/upload/%s\", {v})",
        "setup": None,
        "san": "nixio.fs.basename({v})",
    },
    "SQLI": {
        "sinks": [("conn:exec", "conn:exec({a})"), ("conn:execute", "conn:execute({a})"),
                  ("conn:nrows", "conn:nrows({a})"), ("conn:rows", "conn:rows({a})"),
                  ("conn:urows", "conn:urows({a})")],
        "wrap": "\"SELECT * FROM users WHERE name='\" .. {v} .. \"'\"",
        "fmt": "string.format(\"SELECT * FROM users WHERE name='%s'\", {v})",
        "setup": "local conn = sqlite3.open(\"/etc/app.db\")",
        "san": "tonumber({v})",
    },
}

SRC = "luci.http.formvalue(\"{field}\")"


class Ctx:
    def __init__(self, vt: str, idx: int, fid: str):
        self.vt, self.fid = vt, fid
        spec = TYPES[vt]
        self.sink_name, self._sink = spec["sinks"][idx % len(spec["sinks"])]
        self.spec = spec

    def wrap(self, v: str) -> str:
        return self.spec["wrap"].format(v=v)

    def fmt(self, v: str) -> str:
        return self.spec["fmt"].format(v=v)

    def san(self, v: str) -> str:
        return self.spec["san"].format(v=v)

    def sink(self, a: str, indent: str = "    ") -> list:
        out = []
        if self.spec["setup"]:
            out.append(indent + self.spec["setup"])
        out.append(indent + self._sink.format(a=a) + " -- sink")
        return out

    def src(self, field: str = "value") -> str:
        return SRC.format(field=field)


def header(c: Ctx) -> list:
    return [f"module(\"luci.controller.corpus.{c.fid}\", package.seeall)", ""]


# -- vulnerable flow shapes -------------------------------------------------------
# Each returns the fixture source as a list of lines.

def v_direct(c):
    return header(c) + [f"function {c.fid}_action()", *c.sink(c.wrap(c.src("host"))), "end"]


def v_local(c):
    return header(c) + [f"function {c.fid}_action()", f"    local host = {c.src('host')}",
                        *c.sink(c.wrap("host")), "end"]


def _rename(c, hops):
    names = ["input", "value", "target", "name", "arg"][: hops + 1]
    body = [f"    local {names[0]} = {c.src('target')}"]
    for a, b in zip(names, names[1:]):
        body.append(f"    local {b} = {a}")
    return header(c) + [f"function {c.fid}_action()", *body, *c.sink(c.wrap(names[-1])), "end"]


def v_rename2(c):
    return _rename(c, 2)


def v_rename3(c):
    return _rename(c, 3)


def v_rename4(c):
    return _rename(c, 4)


def v_concat(c):
    return header(c) + [f"function {c.fid}_action()", f"    local item = {c.src('item')}",
                        f"    local built = {c.wrap('item')}", *c.sink("built"), "end"]


def v_format(c):
    return header(c) + [f"function {c.fid}_action()", f"    local item = {c.src('item')}",
                        f"    local built = {c.fmt('item')}", *c.sink("built"), "end"]


def v_inline_param(c):
    return header(c) + [f"local function {c.fid}_run(arg)", *c.sink(c.wrap("arg")), "end", "",
                        f"function {c.fid}_action()", f"    local v = {c.src('v')}",
                        f"    {c.fid}_run(v)", "end"]


def v_inline_return(c):
    return header(c) + [f"local function {c.fid}_param(key)", "    return luci.http.formvalue(key)", "end", "",
                        f"function {c.fid}_action()", f"    local v = {c.fid}_param(\"host\")",
                        *c.sink(c.wrap("v")), "end"]


def v_field(c):
    return header(c) + [f"function {c.fid}_action()", "    local req = {}",
                        f"    req.value = {c.src('value')}", "    req.mode = \"fast\"",
                        *c.sink(c.wrap("req.value")), "end"]


def v_constructor(c):
    return header(c) + [f"function {c.fid}_action()",
                        f"    local opts = {{ target = {c.src('t')}, mode = \"fast\" }}",
                        *c.sink(c.wrap("opts.target")), "end"]


def v_object(c):
    t = f"{c.fid}_Job"
    return header(c) + [f"local {t} = {{}}", f"{t}.__index = {t}", "",
                        f"function {t}:new(arg)", f"    local o = setmetatable({{}}, {t})",
                        "    o.arg = arg", "    o.kind = \"static\"", "    return o", "end", "",
                        f"function {c.fid}_action()", f"    local job = {t}:new({c.src('a')})",
                        *c.sink(c.wrap("job.arg")), "end"]


def v_dispatch_ref(c):
    # a local function reachable only because the dispatcher registers it
    return header(c) + ["function index()",
                        f"    entry({{\"admin\", \"corpus\", \"{c.fid}\"}}, {c.fid}_status).leaf = true",
                        "end", "",
                        f"local function {c.fid}_status(iface)", *c.sink(c.wrap("iface")), "end"]


def v_dispatch_call(c):
    return header(c) + ["function index()",
                        f"    entry({{\"admin\", \"corpus\", \"{c.fid}\"}}, call(\"{c.fid}_bandwidth\"), "
                        "_(\"Status\"), 10).leaf = true",
                        "end", "",
                        f"function {c.fid}_bandwidth(iface)", *c.sink(c.wrap("iface")), "end"]


def v_branch(c):
    return header(c) + [f"function {c.fid}_action()", f"    local v = {c.src('v')}", "    local arg",
                        "    if v == nil or v == \"\" then", "        arg = " + c.wrap('"default"'),
                        "    else", f"        arg = {c.wrap('v')}", "    end", *c.sink("arg"), "end"]


def v_alias(c):
    return header(c) + ["local http = require \"luci.http\"", "",
                        f"function {c.fid}_action()", "    local v = http.formvalue(\"v\")",
                        *c.sink(c.wrap("v")), "end"]


VULNERABLE = [
    ("direct", v_direct), ("local", v_local), ("rename2", v_rename2), ("rename3", v_rename3),
    ("rename4", v_rename4), ("concat", v_concat), ("format", v_format), ("inline-param", v_inline_param),
    ("inline-return", v_inline_return), ("field", v_field), ("constructor", v_constructor),
    ("object", v_object), ("dispatch-ref", v_dispatch_ref), ("dispatch-call", v_dispatch_call),
    ("branch", v_branch), ("alias", v_alias),
]


# -- zero-finding variants ------------------------------------------------------------

def s_direct(c):
    return header(c) + [f"function {c.fid}_action()", *c.sink(c.wrap(c.san(c.src("host")))), "end"]


def s_rename(c):
    return header(c) + [f"function {c.fid}_action()", f"    local raw = {c.src('host')}",
                        f"    local clean = {c.san('raw')}", *c.sink(c.wrap("clean")), "end"]


def s_inline(c):
    return header(c) + [f"local function {c.fid}_clean(x)", f"    return {c.san('x')}", "end", "",
                        f"function {c.fid}_action()", f"    local v = {c.fid}_clean({c.src('v')})",
                        *c.sink(c.wrap("v")), "end"]


def k_field(c):
    return header(c) + [f"function {c.fid}_action()", "    local req = {}",
                        f"    req.value = {c.src('value')}", "    req.mode = \"fast\"",
                        *c.sink(c.wrap("req.mode")), "end"]


def k_literal(c):
    return header(c) + [f"function {c.fid}_action()", "    local name = \"status\"",
                        *c.sink(c.wrap("name")), "end"]


def k_helper_local(c):
    return header(c) + [f"local function {c.fid}_run(arg)", *c.sink(c.wrap("arg")), "end", "",
                        f"function {c.fid}_action()", f"    {c.fid}_run(\"lan\")", f"    {c.fid}_run(\"wan\")",
                        "end"]


SAFE = [
    ("sanitized", "direct", s_direct), ("sanitized", "rename", s_rename), ("sanitized", "inline", s_inline),
    ("constant", "field", k_field), ("constant", "literal", k_literal),
    ("constant", "inline-constant", k_helper_local),
]


# -- not web-reachable (library files) --------------------------------------------

def lib_header(c):
    return [f"module(\"luci.model.corpus.{c.fid}\", package.seeall)", ""]


def u_constant_public(c):
    # public library function called internally only with literals
    return lib_header(c) + [f"function {c.fid}_restart(name)", *c.sink(c.wrap("name")), "end", "",
                            f"function {c.fid}_boot()", f"    {c.fid}_restart(\"network\")", "end"]


def u_env(c):
    return lib_header(c) + [f"function {c.fid}_sync()", "    local p = os.getenv(\"SYNC_TARGET\")",
                            *c.sink(c.wrap("p")), "end"]


def u_param(c):
    return lib_header(c) + [f"function {c.fid}_apply(v)", *c.sink(c.wrap("v")), "end"]


UNREACHABLE = [("constant-public", u_constant_public), ("env", u_env), ("param", u_param)]


def sink_lines(lines: list) -> list:
    return [i for i, line in enumerate(lines, 1) if line.endswith("-- sink")]


def write(rel: str, lines: list, meta: dict) -> None:
    path = OUT / (rel + ".lua")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    (OUT / (rel + ".expect.json")).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def finding(vt, sink, line, arg=1):
    return {"type": vt, "sink": sink, "line": line, "arg": arg}


def generate() -> int:
    if OUT.exists():
        for p in OUT.iterdir():
            if p.is_dir():
                shutil.rmtree(p)
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "trigger_words.json").write_text(json.dumps(TRIGGER_WORDS, indent=2) + "\n", encoding="utf-8")
    count = 0
    for vt in TYPES:
        low = vt.lower()
        n = 0
        for i, (feature, fn) in enumerate(VULNERABLE):
            n += 1
            c = Ctx(vt, i, f"{low}{n:02d}")
            lines = fn(c)
            (line,) = sink_lines(lines)
            exp = [finding(vt, c.sink_name, line)]
            write(f"{low}/{n:02d}_{feature}", lines, {
                "path": f"{CONTROLLER}/{c.fid}.lua", "category": vt, "variant": "vulnerable",
                "feature": feature, "web_reachable": True, "findings": exp,
                "findings_without_framework_rules": exp})
        for i, (variant, feature, fn) in enumerate(SAFE):
            n += 1
            c = Ctx(vt, i, f"{low}{n:02d}")
            lines = fn(c)
            write(f"{low}/{n:02d}_{variant}_{feature}", lines, {
                "path": f"{CONTROLLER}/{c.fid}.lua", "category": vt, "variant": variant,
                "feature": feature, "web_reachable": True, "findings": [],
                "findings_without_framework_rules": []})
        for i, (feature, fn) in enumerate(UNREACHABLE):
            n += 1
            c = Ctx(vt, i, f"{low}{n:02d}")
            lines = fn(c)
            (line,) = sink_lines(lines)
            write(f"{low}/{n:02d}_unreachable_{feature}", lines, {
                "path": f"{LIBRARY}/{c.fid}.lua", "category": vt, "variant": "unreachable",
                "feature": feature, "web_reachable": False, "findings": [],
                "findings_without_framework_rules": [finding(vt, c.sink_name, line)]})
        count += n
    count += write_listing_fixtures()
    return count


# Listings from published firmware, staged at their original controller paths.
LISTING_FIXTURES = [
    ("listing2_bean", "usr/lib/lua/luci/controller/bean.lua", "CI", "object", [("os.execute", 13)]),
    ("listing3_bridge", "usr/lib/lua/luci/controller/admin/bridge.lua", "CI", "inline-chain", [("io.popen", 5)]),
    ("listing4_network", "usr/lib/lua/luci/controller/admin/network.lua", "CI", "public-param",
     [("luci.sys.call", 6)]),
    ("listing5_commands", "usr/lib/lua/luci/controller/commands.lua", "PAT", "direct", [("os.remove", 5)]),
]


def write_listing_fixtures() -> int:
    for name, path, vt, feature, sinks in LISTING_FIXTURES:
        lines = (REFERENCE / f"{name}.lua").read_text(encoding="utf-8").splitlines()
        exp = [finding(vt, s, line) for s, line in sinks]
        write(f"firmware/{name}", lines, {
            "path": path, "category": vt, "variant": "vulnerable", "feature": feature,
            "web_reachable": True, "findings": exp, "findings_without_framework_rules": exp})
    return len(LISTING_FIXTURES)


if __name__ == "__main__":
    print(f"wrote {generate()} fixtures to {OUT}", file=sys.stderr)
