"""AST node types for Lua 5.1 chunks."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import ClassVar, Iterator, Optional


@dataclass(frozen=True)
class Span:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int  # exclusive
    start: int  # byte offsets into the sanitized text, end exclusive
    end: int

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(eq=False)
class Node:
    span: Span
    # names of attributes holding child nodes (or lists of them), in source order
    _children: ClassVar[tuple[str, ...]] = ()

    @property
    def kind(self) -> str:
        return type(self).__name__

    @property
    def children(self) -> list["Node"]:
        out = []
        for name in self._children:
            value = getattr(self, name)
            if isinstance(value, Node):
                out.append(value)
            elif isinstance(value, list):
                out.extend(v for v in value if v is not None)
        out.sort(key=lambda n: n.span.start)
        return out

    def walk(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self) -> str:
        attrs = ", ".join(
            f"{f.name}={getattr(self, f.name)!r}" for f in fields(self) if f.name != "span"
        )
        return f"{self.kind}({attrs})"


# -- expressions ------------------------------------------------------------


@dataclass(eq=False, repr=False)
class Name(Node):
    id: str = ""


@dataclass(eq=False, repr=False)
class StringLit(Node):
    value: str = ""


@dataclass(eq=False, repr=False)
class NumberLit(Node):
    value: float = 0


@dataclass(eq=False, repr=False)
class Nil(Node):
    pass


@dataclass(eq=False, repr=False)
class TrueLit(Node):
    pass


@dataclass(eq=False, repr=False)
class FalseLit(Node):
    pass


@dataclass(eq=False, repr=False)
class Varargs(Node):
    pass


@dataclass(eq=False, repr=False)
class Paren(Node):
    expr: Node = None
    _children = ("expr",)


@dataclass(eq=False, repr=False)
class Index(Node):
    """``obj.key`` (dot=True) or ``obj[key]``."""

    obj: Node = None
    key: Node = None
    dot: bool = False
    _children = ("obj", "key")


@dataclass(eq=False, repr=False)
class Call(Node):
    func: Node = None
    args: list = field(default_factory=list)
    _children = ("func", "args")

    @property
    def qualified_name(self) -> Optional[str]:
        """Dotted name of the callee, or None when it is computed at runtime."""
        return static_name(self.func)


@dataclass(eq=False, repr=False)
class MethodCall(Node):
    obj: Node = None
    method: Name = None
    args: list = field(default_factory=list)
    _children = ("obj", "method", "args")

    @property
    def qualified_name(self) -> Optional[str]:
        base = static_name(self.obj)
        return None if base is None else f"{base}.{self.method.id}"


@dataclass(eq=False, repr=False)
class BinOp(Node):
    op: str = ""
    left: Node = None
    right: Node = None
    _children = ("left", "right")


@dataclass(eq=False, repr=False)
class UnOp(Node):
    op: str = ""
    operand: Node = None
    _children = ("operand",)


@dataclass(eq=False, repr=False)
class TableField(Node):
    """One constructor entry; ``key`` is None for positional items."""

    key: Optional[Node] = None
    value: Node = None
    _children = ("key", "value")


@dataclass(eq=False, repr=False)
class TableConstructor(Node):
    fields: list = field(default_factory=list)
    _children = ("fields",)


@dataclass(eq=False, repr=False)
class FunctionDef(Node):
    """Function definition, as a statement or as an expression.

    ``name`` is None for anonymous function expressions. ``is_method`` marks
    ``function T:m()`` which carries an implicit ``self`` parameter.
    """

    name: Optional[Node] = None
    params: list = field(default_factory=list)
    is_vararg: bool = False
    body: "Block" = None
    is_local: bool = False
    is_method: bool = False
    _children = ("name", "params", "body")

    @property
    def qualified_name(self) -> Optional[str]:
        if self.name is None:
            return None
        return static_name(self.name)

    @property
    def param_names(self) -> list[str]:
        names = [p.id for p in self.params]
        if self.is_method:
            names.insert(0, "self")
        if self.is_vararg:
            names.append("...")
        return names


# -- statements -------------------------------------------------------------


@dataclass(eq=False, repr=False)
class Block(Node):
    body: list = field(default_factory=list)
    _children = ("body",)


@dataclass(eq=False, repr=False)
class Chunk(Node):
    body: Block = None
    _children = ("body",)


@dataclass(eq=False, repr=False)
class LocalAssign(Node):
    targets: list = field(default_factory=list)
    values: list = field(default_factory=list)
    _children = ("targets", "values")


@dataclass(eq=False, repr=False)
class Assign(Node):
    targets: list = field(default_factory=list)
    values: list = field(default_factory=list)
    _children = ("targets", "values")


@dataclass(eq=False, repr=False)
class Do(Node):
    body: Block = None
    _children = ("body",)


@dataclass(eq=False, repr=False)
class While(Node):
    cond: Node = None
    body: Block = None
    _children = ("cond", "body")


@dataclass(eq=False, repr=False)
class Repeat(Node):
    body: Block = None
    cond: Node = None
    _children = ("body", "cond")


@dataclass(eq=False, repr=False)
class If(Node):
    """``if``/``elseif`` chain: ``tests[i]`` guards ``bodies[i]``."""

    tests: list = field(default_factory=list)
    bodies: list = field(default_factory=list)
    orelse: Optional[Block] = None
    _children = ("tests", "bodies", "orelse")


@dataclass(eq=False, repr=False)
class NumericFor(Node):
    var: Name = None
    start: Node = None
    stop: Node = None
    step: Optional[Node] = None
    body: Block = None
    _children = ("var", "start", "stop", "step", "body")


@dataclass(eq=False, repr=False)
class GenericFor(Node):
    names: list = field(default_factory=list)
    exprs: list = field(default_factory=list)
    body: Block = None
    _children = ("names", "exprs", "body")


@dataclass(eq=False, repr=False)
class Return(Node):
    values: list = field(default_factory=list)
    _children = ("values",)


@dataclass(eq=False, repr=False)
class Break(Node):
    pass


LITERALS = (StringLit, NumberLit, Nil, TrueLit, FalseLit)


def static_name(node: Node) -> Optional[str]:
    """Return ``a.b.c`` for a static name chain, else None."""
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Paren):
        return None
    if isinstance(node, Index):
        base = static_name(node.obj)
        if base is None:
            return None
        if isinstance(node.key, StringLit) and node.key.value.isidentifier():
            return f"{base}.{node.key.value}"
        return None
    return None
