"""AST node model shared by parsed code and pattern templates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .lexer import Position, Token

NODE_TYPES = (
    "TranslationUnit",
    "FunctionDef",
    "ParamList",
    "Param",
    "CompoundStmt",
    "DeclStmt",
    "ExprStmt",
    "IfStmt",
    "WhileStmt",
    "ForStmt",
    "ReturnStmt",
    "BreakStmt",
    "ContinueStmt",
    "OpaqueStmt",
    "BinaryExpr",
    "UnaryExpr",
    "CallExpr",
    "FieldAccess",
    "IndexExpr",
    "AssignExpr",
    "Identifier",
    "Literal",
    "TypeName",
    "PointerType",
)

# Only appears in pattern templates: `...` inside argument or parameter lists.
DOTS = "Dots"

STATEMENT_TYPES = frozenset(
    {
        "CompoundStmt",
        "DeclStmt",
        "ExprStmt",
        "IfStmt",
        "WhileStmt",
        "ForStmt",
        "ReturnStmt",
        "BreakStmt",
        "ContinueStmt",
        "OpaqueStmt",
    }
)
EXPRESSION_TYPES = frozenset(
    {
        "BinaryExpr",
        "UnaryExpr",
        "CallExpr",
        "FieldAccess",
        "IndexExpr",
        "AssignExpr",
        "Identifier",
        "Literal",
    }
)
TYPE_TYPES = frozenset({"TypeName", "PointerType"})


class Node:
    """One AST node.

    ``label`` carries the non-child payload: operator for expressions, the
    name for identifiers, the text for literals and type names.  ``tokens`` is
    the slice of source tokens the node covers (empty for synthetic nodes
    built by the inferrer or by instantiation).
    """

    __slots__ = ("type", "children", "label", "tokens", "_key")

    def __init__(self, type: str, children=(), label: str | None = None, tokens=()):
        self.type = type
        self.children: tuple[Node, ...] = tuple(children)
        self.label = label
        self.tokens: tuple[Token, ...] = tuple(tokens)
        self._key = None

    def __repr__(self) -> str:
        lab = f" {self.label!r}" if self.label is not None else ""
        return f"<{self.type}{lab} [{len(self.children)}]>"

    def key(self) -> tuple:
        """Structural identity: type, label and children, no positions."""
        if self._key is None:
            self._key = (self.type, self.label, tuple(c.key() for c in self.children))
        return self._key

    def same(self, other: "Node") -> bool:
        return self.key() == other.key()

    @property
    def start(self) -> int:
        return self.tokens[0].offset

    @property
    def end(self) -> int:
        return self.tokens[-1].end

    @property
    def span(self) -> tuple[Position, Position]:
        last = self.tokens[-1]
        end = Position(last.position.file, last.position.line, last.position.column + len(last.lexeme))
        return self.tokens[0].position, end

    @property
    def first_line(self) -> int:
        return self.tokens[0].line

    @property
    def last_line(self) -> int:
        t = self.tokens[-1]
        return t.line + t.lexeme.count("\n")

    def text(self) -> str:
        """Single-space-joined lexemes."""
        return " ".join(t.lexeme for t in self.tokens)

    def walk(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def postorder(self) -> Iterator["Node"]:
        for child in self.children:
            yield from child.postorder()
        yield self

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    @property
    def is_statement(self) -> bool:
        return self.type in STATEMENT_TYPES

    @property
    def is_expression(self) -> bool:
        return self.type in EXPRESSION_TYPES


@dataclass(frozen=True)
class AstUnit:
    path: str
    source: str
    root: Node
    tokens: tuple[Token, ...]
    trailing: str = ""
    degenerate: bool = False
    cfgs: dict = field(default_factory=dict, compare=False, repr=False)

    def functions(self) -> list[Node]:
        return [c for c in self.root.children if c.type == "FunctionDef"]

    def cfg(self, function: Node):
        from .cfg import build_cfg

        key = id(function)
        if key not in self.cfgs:
            self.cfgs[key] = build_cfg(function)
        return self.cfgs[key]


def function_name(fn: Node) -> str:
    return fn.children[1].label


def is_void_function(fn: Node) -> bool:
    ret = fn.children[0]
    return ret.type == "TypeName" and ret.label.split()[-1] == "void"
