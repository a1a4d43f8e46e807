"""Recursive-descent parser for Lua 5.1."""

from __future__ import annotations

from . import ast
from .lexer import LuaSyntaxError, Token, tokenize

# binary operator precedence as (left, right); right-assoc ops bind tighter on the right
BINARY_PRIORITY = {
    "or": (1, 1), "and": (2, 2),
    "<": (3, 3), ">": (3, 3), "<=": (3, 3), ">=": (3, 3), "~=": (3, 3), "==": (3, 3),
    "..": (5, 4),
    "+": (6, 6), "-": (6, 6),
    "*": (7, 7), "/": (7, 7), "%": (7, 7),
    "^": (10, 9),
}
UNARY_PRIORITY = 8
_BLOCK_END = frozenset(("else", "elseif", "end", "until", "EOF"))


class Parser:
    def __init__(self, text: str, path: str = ""):
        self.text = text
        self.path = path
        self.toks = tokenize(text, path)
        self.i = 0

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.type != "EOF":
            self.i += 1
        return tok

    def check(self, *types: str) -> bool:
        return self.tok.type in types

    def accept(self, type_: str) -> Token | None:
        if self.tok.type == type_:
            return self.advance()
        return None

    def expect(self, type_: str, opener: Token | None = None) -> Token:
        if self.tok.type == type_:
            return self.advance()
        near = "<eof>" if self.tok.type == "EOF" else self.text[self.tok.start:self.tok.end]
        msg = f"'{type_}' expected near '{near}'"
        if opener is not None and opener.line != self.tok.line:
            msg = f"'{type_}' expected (to close '{opener.type}' at line {opener.line}) near '{near}'"
        self.error(msg)

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise LuaSyntaxError(message, tok.line, tok.col, self.path)

    def span(self, first: Token, last: Token | None = None) -> ast.Span:
        last = last or self.toks[self.i - 1]
        end_line = last.line + self.text.count("\n", last.start, last.end)
        nl = self.text.rfind("\n", 0, last.end)
        end_col = last.end - (nl + 1) + 1
        return ast.Span(self.path, first.line, first.col, end_line, end_col, first.start, last.end)

    def span_from(self, node: ast.Node) -> ast.Span:
        s = node.span
        last = self.toks[self.i - 1]
        full = self.span(last, last)
        return ast.Span(self.path, s.start_line, s.start_col, full.end_line, full.end_col, s.start, last.end)

    # -- blocks and statements ------------------------------------------------

    def parse_chunk(self) -> ast.Chunk:
        first = self.tok
        block = self.block()
        if not self.check("EOF"):
            self.error(f"'<eof>' expected near '{self.text[self.tok.start:self.tok.end]}'")
        if block.body:
            span = ast.Span(self.path, first.line, first.col, block.span.end_line,
                            block.span.end_col, first.start, block.span.end)
        else:
            span = ast.Span(self.path, 1, 1, 1, 1, 0, 0)
        return ast.Chunk(span, block)

    def block(self) -> ast.Block:
        first = self.tok
        body = []
        while not self.check(*_BLOCK_END):
            if self.check("return"):
                body.append(self.return_stat())
                break
            if self.check("break"):
                tok = self.advance()
                body.append(ast.Break(self.span(tok, tok)))
                self.accept(";")
                break
            stmt = self.statement()
            if stmt is not None:
                body.append(stmt)
        if body:
            span = ast.Span(self.path, body[0].span.start_line, body[0].span.start_col,
                            body[-1].span.end_line, body[-1].span.end_col,
                            body[0].span.start, body[-1].span.end)
        else:
            span = ast.Span(self.path, first.line, first.col, first.line, first.col,
                            first.start, first.start)
        return ast.Block(span, body)

    def return_stat(self) -> ast.Return:
        first = self.advance()
        values = []
        if not self.check(*_BLOCK_END, ";"):
            values = self.exprlist()
        node = ast.Return(self.span(first), values)
        self.accept(";")
        return node

    def statement(self):
        tok = self.tok
        t = tok.type
        if t == ";":
            self.advance()
            return None
        if t == "if":
            return self.if_stat()
        if t == "while":
            self.advance()
            cond = self.expr()
            self.expect("do")
            body = self.block()
            self.expect("end", tok)
            return ast.While(self.span(tok), cond, body)
        if t == "do":
            self.advance()
            body = self.block()
            self.expect("end", tok)
            return ast.Do(self.span(tok), body)
        if t == "for":
            return self.for_stat()
        if t == "repeat":
            self.advance()
            body = self.block()
            self.expect("until", tok)
            cond = self.expr()
            return ast.Repeat(self.span(tok), body, cond)
        if t == "function":
            self.advance()
            name, is_method = self.funcname()
            fn = self.funcbody(tok, name=name, is_method=is_method)
            return fn
        if t == "local":
            self.advance()
            if self.check("function"):
                self.advance()
                name_tok = self.expect("NAME")
                name = ast.Name(self.span(name_tok, name_tok), name_tok.value)
                return self.funcbody(tok, name=name, is_local=True)
            targets = [self.name()]
            while self.accept(","):
                targets.append(self.name())
            values = []
            if self.accept("="):
                values = self.exprlist()
            return ast.LocalAssign(self.span(tok), targets, values)
        if t == "NAME" and tok.value == "goto" and self.peek().type == "NAME":
            self.error("'goto' is not supported in Lua 5.1")
        if t == ":" and self.peek().type == ":":
            self.error("labels are not supported in Lua 5.1")
        return self.expr_stat()

    def if_stat(self) -> ast.If:
        first = self.advance()
        tests = [self.expr()]
        self.expect("then")
        bodies = [self.block()]
        orelse = None
        while True:
            if self.accept("elseif"):
                tests.append(self.expr())
                self.expect("then")
                bodies.append(self.block())
            elif self.accept("else"):
                orelse = self.block()
                self.expect("end", first)
                break
            else:
                self.expect("end", first)
                break
        return ast.If(self.span(first), tests, bodies, orelse)

    def for_stat(self):
        first = self.advance()
        n1 = self.name()
        if self.accept("="):
            start = self.expr()
            self.expect(",")
            stop = self.expr()
            step = self.expr() if self.accept(",") else None
            self.expect("do")
            body = self.block()
            self.expect("end", first)
            return ast.NumericFor(self.span(first), n1, start, stop, step, body)
        names = [n1]
        while self.accept(","):
            names.append(self.name())
        self.expect("in")
        exprs = self.exprlist()
        self.expect("do")
        body = self.block()
        self.expect("end", first)
        return ast.GenericFor(self.span(first), names, exprs, body)

    def funcname(self):
        first = self.expect("NAME")
        node = ast.Name(self.span(first, first), first.value)
        is_method = False
        while self.check(".", ":"):
            sep = self.advance()
            key_tok = self.expect("NAME")
            key = ast.StringLit(self.span(key_tok, key_tok), key_tok.value)
            node = ast.Index(self.span(first), node, key, True)
            if sep.type == ":":
                is_method = True
                break
        return node, is_method

    def funcbody(self, first: Token, name=None, is_local=False, is_method=False) -> ast.FunctionDef:
        open_tok = self.expect("(")
        params = []
        is_vararg = False
        if not self.check(")"):
            while True:
                if self.check("..."):
                    self.advance()
                    is_vararg = True
                    break
                params.append(self.name())
                if not self.accept(","):
                    break
        self.expect(")", open_tok)
        body = self.block()
        self.expect("end", first)
        return ast.FunctionDef(self.span(first), name, params, is_vararg, body, is_local, is_method)

    def name(self) -> ast.Name:
        tok = self.expect("NAME")
        return ast.Name(self.span(tok, tok), tok.value)

    def expr_stat(self):
        first = self.tok
        target = self.suffixedexp()
        if self.check("=", ","):
            targets = [target]
            while self.accept(","):
                targets.append(self.suffixedexp())
            for t in targets:
                if not isinstance(t, (ast.Name, ast.Index)):
                    self.error("syntax error: cannot assign to expression", first)
            self.expect("=")
            values = self.exprlist()
            return ast.Assign(self.span(first), targets, values)
        if not isinstance(target, (ast.Call, ast.MethodCall)):
            self.error("syntax error: expression is not a statement", first)
        return target

    # -- expressions ----------------------------------------------------------

    def exprlist(self) -> list:
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        return out

    def expr(self, limit: int = 0):
        first = self.tok
        if self.check("not", "-", "#"):
            op = self.advance().type
            operand = self.expr(UNARY_PRIORITY)
            left = ast.UnOp(self.span(first), op, operand)
        else:
            left = self.simpleexp()
        while self.tok.type in BINARY_PRIORITY and BINARY_PRIORITY[self.tok.type][0] > limit:
            op = self.advance().type
            right = self.expr(BINARY_PRIORITY[op][1])
            left = ast.BinOp(self.span(first), op, left, right)
        return left

    def simpleexp(self):
        tok = self.tok
        t = tok.type
        if t == "NUMBER":
            self.advance()
            return ast.NumberLit(self.span(tok, tok), tok.value)
        if t == "STRING":
            self.advance()
            return ast.StringLit(self.span(tok, tok), tok.value)
        if t == "nil":
            self.advance()
            return ast.Nil(self.span(tok, tok))
        if t == "true":
            self.advance()
            return ast.TrueLit(self.span(tok, tok))
        if t == "false":
            self.advance()
            return ast.FalseLit(self.span(tok, tok))
        if t == "...":
            self.advance()
            return ast.Varargs(self.span(tok, tok))
        if t == "{":
            return self.table()
        if t == "function":
            self.advance()
            return self.funcbody(tok)
        return self.suffixedexp()

    def primaryexp(self):
        tok = self.tok
        if tok.type == "NAME":
            self.advance()
            return ast.Name(self.span(tok, tok), tok.value)
        if tok.type == "(":
            self.advance()
            inner = self.expr()
            self.expect(")", tok)
            return ast.Paren(self.span(tok), inner)
        near = "<eof>" if tok.type == "EOF" else self.text[tok.start:tok.end]
        self.error(f"unexpected symbol near '{near}'")

    def suffixedexp(self):
        node = self.primaryexp()
        while True:
            t = self.tok.type
            if t == ".":
                self.advance()
                key_tok = self.expect("NAME")
                key = ast.StringLit(self.span(key_tok, key_tok), key_tok.value)
                node = ast.Index(self.span_from(node), node, key, True)
            elif t == "[":
                self.advance()
                key = self.expr()
                self.expect("]")
                node = ast.Index(self.span_from(node), node, key, False)
            elif t == ":":
                self.advance()
                method = self.name()
                args = self.callargs()
                node = ast.MethodCall(self.span_from(node), node, method, args)
            elif t in ("(", "STRING", "{"):
                if t == "(" and self.tok.line != self.toks[self.i - 1].line:
                    # Lua 5.1 rejects a call whose '(' starts a new line
                    self.error("ambiguous syntax (function call x new statement)")
                args = self.callargs()
                node = ast.Call(self.span_from(node), node, args)
            else:
                return node

    def callargs(self) -> list:
        tok = self.tok
        if tok.type == "STRING":
            self.advance()
            return [ast.StringLit(self.span(tok, tok), tok.value)]
        if tok.type == "{":
            return [self.table()]
        open_tok = self.expect("(")
        args = [] if self.check(")") else self.exprlist()
        self.expect(")", open_tok)
        return args

    def table(self) -> ast.TableConstructor:
        first = self.expect("{")
        items = []
        while not self.check("}"):
            ftok = self.tok
            if ftok.type == "[":
                self.advance()
                key = self.expr()
                self.expect("]")
                self.expect("=")
                value = self.expr()
                items.append(ast.TableField(self.span(ftok), key, value))
            elif ftok.type == "NAME" and self.peek().type == "=":
                self.advance()
                self.advance()
                key = ast.StringLit(self.span(ftok, ftok), ftok.value)
                value = self.expr()
                items.append(ast.TableField(self.span(ftok), key, value))
            else:
                value = self.expr()
                items.append(ast.TableField(self.span(ftok), None, value))
            if not (self.accept(",") or self.accept(";")):
                break
        self.expect("}", first)
        return ast.TableConstructor(self.span(first), items)


def parse_chunk(text: str, path: str = "") -> ast.Chunk:
    """Parse already-prescanned source text into a Chunk.

    Raises LuaSyntaxError with the file path and 1-based position.
    """
    return Parser(text, path).parse_chunk()
