"""Pre-parse repair of escape sequences the strict lexer rejects.

Vendor LuCI code is full of pattern strings such as ``"\\^[0-9\\*]+"`` that
only the permissive reference interpreter accepts. Before parsing, every short
string literal is scanned and escape sequences listed in the fixup table are
rewritten to their Lua-pattern equivalents. Code outside string literals,
comments and long strings are never touched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

DEFAULT_FIXUPS: tuple[tuple[bytes, bytes], ...] = (
    (b"\\*", b"%*"),
    (b"\\-", b"%-"),
)

_LONG_OPEN = re.compile(rb"\[(=*)\[")


@dataclass(frozen=True)
class Fixup:
    line: int
    column: int
    original: bytes
    replacement: bytes
    offset: int  # position of the replacement in the sanitized text


@dataclass
class SourceFile:
    path: str
    raw_text: bytes
    sanitized_text: bytes = b""
    fixups: list = None

    @property
    def text(self) -> str:
        return self.sanitized_text.decode("latin-1")


class FixupError(ValueError):
    pass


def load_fixup_table(path: str | Path) -> tuple[tuple[bytes, bytes], ...]:
    """Read ``FROM<TAB>TO`` rules; ``#`` starts a comment line.

    The shipped defaults are always included; file rules are appended and a
    rule with the same FROM overrides the default.
    """
    rules = dict(DEFAULT_FIXUPS)
    for lineno, raw in enumerate(Path(path).read_bytes().splitlines(), 1):
        line = raw.rstrip(b"\r")
        if not line.strip() or line.lstrip().startswith(b"#"):
            continue
        parts = line.split(b"\t")
        if len(parts) != 2 or not parts[0]:
            raise FixupError(f"{path}:{lineno}: expected FROM<TAB>TO")
        src, dst = parts
        if not src.startswith(b"\\") or len(src) < 2:
            raise FixupError(f"{path}:{lineno}: FROM must be an escape sequence like \\*")
        rules[src] = dst
    table = tuple(rules.items())
    for src, dst in table:
        if b"\\" in dst:
            raise FixupError(f"replacement for {src!r} must not contain a backslash")
    return table


def prescan_source(raw_text: bytes, table=DEFAULT_FIXUPS) -> tuple[bytes, list[Fixup]]:
    """Rewrite table escapes inside short string literals.

    Returns the sanitized bytes and one Fixup per rewrite. Escapes that are
    not in the table (including ``\\\\``) are copied through unchanged.
    """
    rules = sorted(table, key=lambda r: -len(r[0]))
    out = bytearray()
    fixups: list[Fixup] = []
    data = raw_text
    n = len(data)
    i = 0
    line = 1
    line_start = 0

    def copy_to(j: int) -> None:
        nonlocal i, line, line_start
        chunk = data[i:j]
        nl = chunk.count(b"\n")
        if nl:
            line += nl
            line_start = i + chunk.rfind(b"\n") + 1
        out.extend(chunk)
        i = j

    while i < n:
        c = data[i]
        if c == 0x2D and data.startswith(b"--", i):  # comment
            m = _LONG_OPEN.match(data, i + 2)
            if m:
                end = data.find(b"]" + m.group(1) + b"]", m.end())
                copy_to(n if end < 0 else end + len(m.group(1)) + 2)
            else:
                end = data.find(b"\n", i)
                copy_to(n if end < 0 else end)
        elif c == 0x5B:  # possible long string
            m = _LONG_OPEN.match(data, i)
            if m:
                end = data.find(b"]" + m.group(1) + b"]", m.end())
                copy_to(n if end < 0 else end + len(m.group(1)) + 2)
            else:
                copy_to(i + 1)
        elif c in (0x22, 0x27):  # short string
            quote = c
            copy_to(i + 1)
            while i < n and data[i] != quote and data[i] != 0x0A:
                if data[i] == 0x5C:
                    for src, dst in rules:
                        if data.startswith(src, i):
                            fixups.append(Fixup(line, i - line_start + 1, src, dst, len(out)))
                            out.extend(dst)
                            i += len(src)
                            break
                    else:
                        copy_to(min(i + 2, n))
                else:
                    copy_to(i + 1)
            if i < n and data[i] == quote:
                copy_to(i + 1)
        else:
            # fast-forward to the next byte that can open a literal or comment
            j = i + 1
            while j < n and data[j] not in b"-[\"'":
                j += 1
            copy_to(j)
    return bytes(out), fixups


def undo_fixups(sanitized: bytes, fixups: list[Fixup]) -> bytes:
    """Reverse ``prescan_source``: put the original escapes back."""
    out = bytearray()
    pos = 0
    for fx in sorted(fixups, key=lambda f: f.offset):
        out.extend(sanitized[pos:fx.offset])
        out.extend(fx.original)
        pos = fx.offset + len(fx.replacement)
    out.extend(sanitized[pos:])
    return bytes(out)


def prescan_file(path: str, raw_text: bytes, table=DEFAULT_FIXUPS) -> SourceFile:
    sanitized, fixups = prescan_source(raw_text, table)
    return SourceFile(path, raw_text, sanitized, fixups)
