"""Template-to-code matching with metavariable bindings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from ..lang.ast import DOTS, TYPE_TYPES, Node
from ..lang.cfg import Cfg, CfgNode
from ..lang.lexer import Position

COMPOUND_TYPES = ("IfStmt", "WhileStmt", "ForStmt")


@dataclass(frozen=True)
class Bound:
    """A bound code fragment; equal when structurally equal."""

    key: tuple
    node: Node = field(compare=False, hash=False, repr=False)


class Binding:
    """Immutable metavariable assignment."""

    __slots__ = ("_d", "_t", "_h")

    def __init__(self, items=()):
        self._d = dict(items)
        self._t = tuple(sorted(self._d.items(), key=lambda kv: kv[0]))
        self._h = hash(self._t)

    def bind(self, name: str, value) -> "Binding | None":
        old = self._d.get(name)
        if old is not None:
            return self if old == value else None
        d = dict(self._d)
        d[name] = value
        return Binding(d)

    def get(self, name: str):
        return self._d.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._d

    def items(self):
        return self._t

    def names(self):
        return self._d.keys()

    def restrict(self, names) -> "Binding":
        return Binding((k, v) for k, v in self._d.items() if k in names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Binding) and self._t == other._t

    def __hash__(self) -> int:
        return self._h

    def __len__(self) -> int:
        return len(self._d)

    def __repr__(self) -> str:
        parts = []
        for k, v in self._t:
            parts.append(f"{k}={value_text(v)}")
        return "Binding(" + ", ".join(parts) + ")"


def value_text(v) -> str:
    if isinstance(v, Position):
        return f"{v.file}:{v.line}:{v.column}"
    node = v.node
    if node.tokens:
        return node.text()
    return str(v.key)


class TemplateMatcher:
    def __init__(self, kinds: dict[str, str], wildcards=frozenset()):
        self.kinds = kinds
        self.wild = wildcards

    def match(self, t: Node, c: Node, b: Binding) -> Iterator[Binding]:
        tt = t.type
        kinds = self.kinds
        if tt == "Identifier":
            kind = kinds.get(t.label)
            if kind is None:
                if t.label in self.wild:
                    if c.is_expression:
                        yield b
                elif c.type == "Identifier" and c.label == t.label:
                    yield b
                return
            if (
                (kind == "identifier" and c.type == "Identifier")
                or (kind == "expression" and c.is_expression)
                or (kind == "constant" and c.type == "Literal")
            ):
                nb = b.bind(t.label, Bound(c.key(), c))
                if nb is not None:
                    yield nb
            return
        if tt == "TypeName" and kinds.get(t.label) == "type":
            if c.type in TYPE_TYPES:
                nb = b.bind(t.label, Bound(c.key(), c))
                if nb is not None:
                    yield nb
            return
        if tt == "Param" and len(t.children) == 1 and t.children[0].type == "TypeName":
            name = t.children[0].label
            if kinds.get(name) == "parameter":
                if c.type == "Param":
                    nb = b.bind(name, Bound(c.key(), c))
                    if nb is not None:
                        yield nb
                return
        if tt == "ExprStmt" and len(t.children) == 1 and t.children[0].type == "Identifier":
            name = t.children[0].label
            if kinds.get(name) == "statement":
                if c.is_statement:
                    nb = b.bind(name, Bound(c.key(), c))
                    if nb is not None:
                        yield nb
                return
        if tt != c.type or t.label != c.label:
            return
        tc, cc = t.children, c.children
        if any(x.type == DOTS for x in tc):
            yield from self._seq(tc, 0, cc, 0, b)
            return
        if len(tc) != len(cc):
            return
        yield from self._zip(tc, cc, 0, b)

    def _zip(self, tc, cc, i: int, b: Binding) -> Iterator[Binding]:
        if i == len(tc):
            yield b
            return
        for nb in self.match(tc[i], cc[i], b):
            yield from self._zip(tc, cc, i + 1, nb)

    def _seq(self, tc, i: int, cc, j: int, b: Binding) -> Iterator[Binding]:
        if i == len(tc):
            if j == len(cc):
                yield b
            return
        if tc[i].type == DOTS:
            for k in range(j, len(cc) + 1):
                yield from self._seq(tc, i + 1, cc, k, b)
            return
        if j == len(cc):
            return
        for nb in self.match(tc[i], cc[j], b):
            yield from self._seq(tc, i + 1, cc, j + 1, nb)

    def matches(self, t: Node, c: Node, b: Binding) -> list[Binding]:
        out = []
        for nb in self.match(t, c, b):
            if nb not in out:
                out.append(nb)
        return out

    def any_match(self, t: Node, c: Node, b: Binding) -> bool:
        return next(self.match(t, c, b), None) is not None


# -- what a CFG node offers to a term ------------------------------------------


def expression_subterms(root: Node | None) -> list[Node]:
    """Expressions inside ``root`` in source order; field names are not expressions."""
    out: list[Node] = []
    if root is None:
        return out

    def visit(n: Node) -> None:
        if n.is_expression:
            out.append(n)
        for i, c in enumerate(n.children):
            if n.type == "FieldAccess" and i == 1:
                continue
            visit(c)

    visit(root)
    return out


def evaluated(node: Node | None, outcome: str = "?") -> list[Node]:
    """Subexpressions certainly evaluated when ``node`` yields ``outcome``.

    ``outcome`` is "T", "F" or "?" (unknown).  Right operands of ``&&``/``||``
    and the arms of ``?:`` only count when the outcome forces them.
    """
    if node is None:
        return []
    out: list[Node] = []

    def visit(n: Node, o: str) -> None:
        if not n.is_expression:
            for i, c in enumerate(n.children):
                if c.type not in TYPE_TYPES:
                    visit(c, "?")
            return
        out.append(n)
        lab = n.label
        kids = n.children
        if n.type == "BinaryExpr" and lab == "&&":
            if o == "T":
                visit(kids[0], "T")
                visit(kids[1], "T")
            else:
                visit(kids[0], "?")
        elif n.type == "BinaryExpr" and lab == "||":
            if o == "F":
                visit(kids[0], "F")
                visit(kids[1], "F")
            else:
                visit(kids[0], "?")
        elif n.type == "BinaryExpr" and lab == "?:":
            visit(kids[0], "?")
        elif n.type == "BinaryExpr" and lab == ",":
            visit(kids[0], "?")
            visit(kids[1], o)
        elif n.type == "UnaryExpr" and lab == "!":
            visit(kids[0], {"T": "F", "F": "T"}.get(o, "?"))
        else:
            for i, c in enumerate(kids):
                if n.type == "FieldAccess" and i == 1:
                    continue
                if c.type in TYPE_TYPES:
                    continue
                visit(c, "?")

    visit(node, outcome)
    return out


class CfgView:
    """Per-CFG caches of statement candidates, subterms and evaluated sets."""

    def __init__(self, cfg: Cfg):
        self.cfg = cfg
        self._stmts: dict[int, list] = {}
        self._subs: dict[int, list] = {}
        self._evals: dict[tuple[int, str], list] = {}

    def statements(self, nid: int) -> list[tuple[Node, frozenset | None]]:
        got = self._stmts.get(nid)
        if got is None:
            got = []
            node: CfgNode = self.cfg.nodes[nid]
            if node.kind == "stmt":
                got.append((node.ast, None))
            elif node.owner is not None and node.owner.type in COMPOUND_TYPES:
                if self.cfg.heads.get(id(node.owner)) == nid:
                    got.append((node.owner, self.cfg.regions[id(node.owner)]))
            self._stmts[nid] = got
        return got

    def subterms(self, nid: int) -> list[Node]:
        got = self._subs.get(nid)
        if got is None:
            node = self.cfg.nodes[nid]
            got = expression_subterms(node.ast) if node.kind not in ("entry", "exit") else []
            self._subs[nid] = got
        return got

    def evaluated(self, nid: int, label: str) -> list[Node]:
        k = (nid, label)
        got = self._evals.get(k)
        if got is None:
            node = self.cfg.nodes[nid]
            if node.kind in ("entry", "exit"):
                got = []
            elif node.kind == "cond":
                got = evaluated(node.ast, {"true": "T", "false": "F"}.get(label, "?"))
            else:
                got = evaluated(node.ast, "?")
            self._evals[k] = got
        return got
