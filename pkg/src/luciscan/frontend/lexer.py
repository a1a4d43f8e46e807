"""Tokenizer for Lua 5.1 source text.

Source is handled as ``str`` decoded from latin-1 so every input byte maps to
exactly one character; offsets and columns are therefore byte positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    """and break do else elseif end false for function if in local nil not or
    repeat return then true until while""".split()
)

# longest first so the regex alternation prefers multi-char operators
OPERATORS = sorted(
    "... .. == ~= <= >= + - * / % ^ # < > = ( ) { } [ ] ; : , .".split(),
    key=len,
    reverse=True,
)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(
    r"0[xX][0-9A-Fa-f]+|(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?"
)
_SPACE = re.compile(r"[ \t\r\f\v]+")
_LONG_OPEN = re.compile(r"\[(=*)\[")
_OP = re.compile("|".join(re.escape(op) for op in OPERATORS))

_SIMPLE_ESCAPES = {
    "a": "\a", "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t",
    "v": "\v", "\\": "\\", '"': '"', "'": "'", "\n": "\n", "\r": "\n",
}


class LuaSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int, path: str = ""):
        super().__init__(f"{path}:{line}:{col}: {message}" if path else f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.path = path


@dataclass(frozen=True)
class Token:
    type: str  # NAME, STRING, NUMBER, EOF, or the keyword/operator text itself
    value: object
    start: int
    end: int
    line: int
    col: int

    def key(self) -> tuple:
        return (self.type, self.value)


class Lexer:
    def __init__(self, text: str, path: str = ""):
        self.text = text
        self.path = path
        self.pos = 0
        self.line = 1
        self.line_start = 0
        # a leading shebang line is skipped, as lua.c does
        if text.startswith("#"):
            nl = text.find("\n")
            self.pos = len(text) if nl < 0 else nl

    def error(self, message: str, pos: int | None = None):
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        raise LuaSyntaxError(message, line, col, self.path)

    def _advance_lines(self, start: int, end: int) -> None:
        n = self.text.count("\n", start, end)
        if n:
            self.line += n
            self.line_start = self.text.rfind("\n", start, end) + 1

    def tokens(self) -> list[Token]:
        out = []
        while True:
            tok = self.next()
            out.append(tok)
            if tok.type == "EOF":
                return out

    def _skip(self) -> None:
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            if c == "\n":
                self.pos += 1
                self.line += 1
                self.line_start = self.pos
            elif c in " \t\r\f\v":
                self.pos = _SPACE.match(text, self.pos).end()
            elif text.startswith("--", self.pos):
                start = self.pos
                m = _LONG_OPEN.match(text, self.pos + 2)
                if m:
                    close = "]" + m.group(1) + "]"
                    end = text.find(close, m.end())
                    if end < 0:
                        self.error("unfinished long comment", start)
                    self.pos = end + len(close)
                else:
                    nl = text.find("\n", self.pos)
                    self.pos = len(text) if nl < 0 else nl
                self._advance_lines(start, self.pos)
            else:
                return

    def next(self) -> Token:
        self._skip()
        text = self.text
        start = self.pos
        line, col = self.line, start - self.line_start + 1
        if start >= len(text):
            return Token("EOF", None, start, start, line, col)
        c = text[start]
        if c.isalpha() or c == "_":
            m = _NAME.match(text, start)
            word = m.group()
            self.pos = m.end()
            if word in KEYWORDS:
                return Token(word, word, start, self.pos, line, col)
            return Token("NAME", word, start, self.pos, line, col)
        if c.isdigit() or (c == "." and start + 1 < len(text) and text[start + 1].isdigit()):
            m = _NUMBER.match(text, start)
            raw = m.group()
            self.pos = m.end()
            if self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
                self.error(f"malformed number near '{raw}{text[self.pos]}'", start)
            value = int(raw, 16) if raw[:2] in ("0x", "0X") else float(raw)
            if isinstance(value, float) and value.is_integer() and "." not in raw and "e" not in raw.lower():
                value = int(raw)
            return Token("NUMBER", value, start, self.pos, line, col)
        if c in "\"'":
            value = self._short_string(c)
            return Token("STRING", value, start, self.pos, line, col)
        if c == "[":
            m = _LONG_OPEN.match(text, start)
            if m:
                close = "]" + m.group(1) + "]"
                end = text.find(close, m.end())
                if end < 0:
                    self.error("unfinished long string", start)
                body = text[m.end():end]
                if body.startswith("\r\n"):
                    body = body[2:]
                elif body.startswith("\n"):
                    body = body[1:]
                self.pos = end + len(close)
                self._advance_lines(start, self.pos)
                return Token("STRING", body, start, self.pos, line, col)
        m = _OP.match(text, start)
        if m:
            self.pos = m.end()
            return Token(m.group(), m.group(), start, self.pos, line, col)
        self.error(f"unexpected symbol near '{c}'", start)

    def _short_string(self, quote: str) -> str:
        text = self.text
        i = self.pos + 1
        buf = []
        while True:
            if i >= len(text):
                self.error("unfinished string", self.pos)
            c = text[i]
            if c == quote:
                i += 1
                break
            if c == "\n":
                self.error("unfinished string", self.pos)
            if c != "\\":
                buf.append(c)
                i += 1
                continue
            e = text[i + 1] if i + 1 < len(text) else ""
            if e in _SIMPLE_ESCAPES:
                buf.append(_SIMPLE_ESCAPES[e])
                i += 2
                if e == "\r" and text.startswith("\n", i):
                    i += 1
            elif e.isdigit():
                j = i + 1
                while j < len(text) and j < i + 4 and text[j].isdigit():
                    j += 1
                code = int(text[i + 1:j])
                if code > 255:
                    self.error("escape sequence too large", i)
                buf.append(chr(code))
                i = j
            else:
                # the reference 5.1 lexer silently keeps the character; we reject,
                # which is what the prescan fixup table exists to repair
                self.error(f"invalid escape sequence '\\{e}'", i)
        start = self.pos
        self.pos = i
        self._advance_lines(start, i)
        return "".join(buf)


def tokenize(text: str, path: str = "") -> list[Token]:
    return Lexer(text, path).tokens()
