"""Data model of generic patches (a subset of the semantic-patch language)."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from ..lang.ast import DOTS, Node

METAVAR_KINDS = ("type", "position", "identifier", "parameter", "expression", "constant", "statement")
QUANTIFIERS = ("exists", "forall")
DEFAULT_QUANTIFIER = "forall"
GRANULARITIES = ("hunk", "function", "file", "patch", "project")

# Undeclared upper-case names in `when` terms (NULL, IS_ERR, EINVAL) stay concrete.
_MACRO_NAME = re.compile(r"^[A-Z][A-Z0-9_]*$")


@dataclass(frozen=True)
class MetavarDecl:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in METAVAR_KINDS:
            raise ValueError(f"unknown metavariable kind {self.kind!r}")


class Term:
    """A code template; leaves may name metavariables."""

    __slots__ = ("node", "position", "line")

    def __init__(self, node: Node, position: str | None = None, line: int = 0):
        self.node = node
        self.position = position
        self.line = line

    @property
    def is_statement(self) -> bool:
        return self.node.is_statement

    def key(self) -> tuple:
        return (self.node.key(), self.position)

    def __eq__(self, other) -> bool:
        return isinstance(other, Term) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        pos = f"@{self.position}" if self.position else ""
        return f"Term({self.node!r}{pos})"


@dataclass(frozen=True)
class WhenNot:
    term: Term


@dataclass(frozen=True)
class WhenAny:
    pass


WhenClause = Union[WhenNot, WhenAny]


@dataclass(frozen=True)
class Context:
    term: Term
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Minus:
    term: Term
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Plus:
    term: Term
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Dots:
    whens: tuple = ()
    line: int = field(default=0, compare=False)

    @property
    def any(self) -> bool:
        return any(isinstance(w, WhenAny) for w in self.whens)

    @property
    def forbidden(self) -> list[Term]:
        return [w.term for w in self.whens if isinstance(w, WhenNot)]


@dataclass(frozen=True)
class Disjunction:
    branches: tuple  # tuple of element tuples
    line: int = field(default=0, compare=False)


PatternElem = Union[Context, Minus, Plus, Dots, Disjunction]


@dataclass(frozen=True)
class FunctionHeader:
    """`ret name(params) {` ... `}` around the rule body; ``ret`` is optional."""

    name: Term
    params: Term
    return_type: Term | None = None


def _kind_rank(d: MetavarDecl) -> int:
    return METAVAR_KINDS.index(d.kind)


@dataclass(frozen=True)
class GenericPatchRule:
    name: str
    metavars: tuple[MetavarDecl, ...]
    body: tuple
    header: FunctionHeader | None = None
    quantifier: str = DEFAULT_QUANTIFIER

    def __post_init__(self):
        if self.quantifier not in QUANTIFIERS:
            raise ValueError(f"unknown quantifier {self.quantifier!r}")
        # canonical order: grouped by kind, declaration order within a kind
        ordered = sorted(enumerate(self.metavars), key=lambda p: (_kind_rank(p[1]), p[0]))
        object.__setattr__(self, "metavars", tuple(d for _, d in ordered))
        object.__setattr__(self, "body", tuple(self.body))

    def kinds(self) -> dict[str, str]:
        return {d.name: d.kind for d in self.metavars}

    def names_of(self, *kinds: str) -> set[str]:
        return {d.name for d in self.metavars if d.kind in kinds}

    def elements(self) -> Iterator:
        """Every element, descending into disjunction branches."""
        yield from _walk_elems(self.body)

    def terms(self) -> Iterator[Term]:
        if self.header is not None:
            yield self.header.name
            yield self.header.params
            if self.header.return_type is not None:
                yield self.header.return_type
        for e in self.elements():
            if isinstance(e, (Context, Minus, Plus)):
                yield e.term
            elif isinstance(e, Dots):
                yield from e.forbidden

    def wildcards(self) -> frozenset[str]:
        """Undeclared names inside `when` terms: they match any expression."""
        declared = set(self.kinds())
        out = set()
        for e in self.elements():
            if isinstance(e, Dots):
                for t in e.forbidden:
                    out |= _free_names(t.node, declared)
        return frozenset(out)

    @property
    def is_transforming(self) -> bool:
        return any(isinstance(e, (Minus, Plus)) for e in self.elements())


def _walk_elems(elems) -> Iterator:
    for e in elems:
        yield e
        if isinstance(e, Disjunction):
            for branch in e.branches:
                yield from _walk_elems(branch)


def _free_names(node: Node, declared: set[str]) -> set[str]:
    out: set[str] = set()

    def visit(n: Node, skip: bool) -> None:
        if n.type == "Identifier" and not skip:
            if n.label not in declared and not _MACRO_NAME.match(n.label):
                out.add(n.label)
            return
        for i, c in enumerate(n.children):
            callee = n.type == "CallExpr" and i == 0
            field_name = n.type == "FieldAccess" and i == 1
            visit(c, callee or field_name)

    visit(node, False)
    return out


@dataclass
class PatchStats:
    recall: float = 0.0
    precision: float = 0.0
    frequency: dict = field(default_factory=lambda: {g: 0 for g in GRANULARITIES})

    def __post_init__(self):
        for g in GRANULARITIES:
            self.frequency.setdefault(g, 0)
        if not (0.0 <= self.recall <= 1.0 and 0.0 <= self.precision <= 1.0):
            raise ValueError("recall and precision must lie in [0, 1]")
        if any(v < 0 for v in self.frequency.values()):
            raise ValueError("frequency counts must be non-negative")


@dataclass
class GenericPatch:
    patch_id: str
    rules: tuple[GenericPatchRule, ...]
    provenance: tuple = ()  # dicts: project, commit, file, function, hunk_id[, rule]
    stats: PatchStats = field(default_factory=PatchStats)
    rule_stats: tuple = ()  # optional PatchStats per rule

    def __post_init__(self):
        self.rules = tuple(self.rules)
        self.provenance = tuple(self.provenance)
        self.rule_stats = tuple(self.rule_stats)
        if self.rule_stats and len(self.rule_stats) != len(self.rules):
            raise ValueError("rule_stats must have one entry per rule")
        if not self.rules:
            raise ValueError("a generic patch needs at least one rule")

    @property
    def atomic(self) -> bool:
        return len(self.rules) == 1

    def same_rules(self, other: "GenericPatch") -> bool:
        return self.rules == other.rules


def is_dots_node(node: Node) -> bool:
    return node.type == DOTS
