"""Infer generic patches from clusters of concrete before/after examples.

Each example is reduced to one change: an expression replacement found by
descending into the single differing child of otherwise equal statements, or
a run of removed/added statements from a statement-level diff.  Changes are
grouped greedily: an example joins the first group whose changes it can be
anti-unified with.  Every group yields one rule; rules are scored by
re-applying them to the examples' before-fragments.

Function names are never abstracted: two changes that differ in a callee end
up in different rules.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from difflib import SequenceMatcher

from .engine.apply import ApplicationError, apply_patchset, unified_diff
from .lang.ast import TYPE_TYPES, AstUnit, Node
from .lang.parser import parse_unit
from .smpl.model import (
    Context,
    Dots,
    GenericPatch,
    GenericPatchRule,
    MetavarDecl,
    Minus,
    PatchStats,
    Plus,
    Term,
    WhenNot,
)
from .smpl.validate import validate_rule

DEFAULT_TIMEOUT = 900.0
WILDCARD_VALUE = "any_value"
_PREFIX = {"expression": "E", "identifier": "I", "constant": "C", "type": "T"}


class NoGeneralizationError(ValueError):
    """The terms cannot share one template."""


class _Timeout(Exception):
    pass


@dataclass
class ExamplePair:
    hunk_id: str
    before: str
    after: str
    expected_diff: str = ""
    project: str = ""
    commit: str = ""
    file: str = ""
    function: str = ""
    _units: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.expected_diff:
            self.expected_diff = unified_diff(self.before, self.after, self.file or "fragment.c")

    def units(self) -> tuple[AstUnit, AstUnit]:
        if self._units is None:
            path = self.file or "fragment.c"
            self._units = (parse_unit(self.before, path), parse_unit(self.after, path))
        return self._units

    def provenance(self) -> dict:
        return {
            "project": self.project,
            "commit": self.commit,
            "file": self.file,
            "function": self.function,
            "hunk_id": self.hunk_id,
        }


@dataclass
class InferenceResult:
    patches: list[GenericPatch]
    uncovered: list[str]
    elapsed: float
    timed_out: bool = False

    @property
    def rule_count(self) -> int:
        return sum(len(p.rules) for p in self.patches)


# -- anti-unification ----------------------------------------------------------


def _strip(n: Node) -> Node:
    return Node(n.type, [_strip(c) for c in n.children], n.label)


def _child_contexts(n: Node, ctx: str) -> list[str]:
    out = []
    for i, c in enumerate(n.children):
        if n.type == "CallExpr":
            out.append("callee" if i == 0 else "expr")
        elif n.type == "FieldAccess":
            out.append("ident" if i == 1 else "expr")
        elif n.type == "DeclStmt":
            out.append("type" if i == 0 else "decl")
        elif ctx == "decl" and n.type in ("PointerType", "AssignExpr", "IndexExpr"):
            out.append("decl" if i == 0 else "expr")
        elif n.type == "AssignExpr" and i == 0:
            out.append("lhs")
        elif c.type in TYPE_TYPES:
            out.append("type")
        elif c.is_statement:
            out.append("stmt")
        else:
            out.append("expr")
    return out


class Generalizer:
    """Least-general generalization of node vectors with a shared metavariable table."""

    def __init__(self):
        self.table: dict[tuple, str] = {}
        self.kinds: dict[str, str] = {}
        self.values: dict[str, tuple] = {}
        self._counts: Counter = Counter()

    def snapshot(self):
        return dict(self.table), dict(self.kinds), dict(self.values), Counter(self._counts)

    def restore(self, snap) -> None:
        self.table, self.kinds, self.values, self._counts = (
            dict(snap[0]),
            dict(snap[1]),
            dict(snap[2]),
            Counter(snap[3]),
        )

    def metavar(self, nodes, kind: str) -> Node:
        key = tuple(n.key() for n in nodes)
        name = self.table.get(key)
        if name is None:
            prefix = _PREFIX[kind]
            name = f"{prefix}{self._counts[prefix]}"
            self._counts[prefix] += 1
            self.table[key] = name
            self.kinds[name] = kind
            self.values[name] = tuple(nodes)
        elif kind == "identifier" and self.kinds[name] in ("expression", "constant"):
            self.kinds[name] = "identifier"
        return Node("TypeName" if kind == "type" else "Identifier", (), name)

    def gen(self, nodes, ctx: str = "root") -> Node:
        first = nodes[0]
        if all(n.key() == first.key() for n in nodes):
            return _strip(first)
        if ctx == "callee":
            raise NoGeneralizationError("function names differ")
        same_shape = all(
            n.type == first.type and n.label == first.label and len(n.children) == len(first.children)
            for n in nodes
        )
        if same_shape and first.children:
            snap = self.snapshot()
            try:
                kids = [
                    self.gen([n.children[i] for n in nodes], cctx)
                    for i, cctx in enumerate(_child_contexts(first, ctx))
                ]
                return Node(first.type, kids, first.label)
            except NoGeneralizationError:
                self.restore(snap)
                if ctx in ("root", "stmt", "decl", "type"):
                    raise
        return self.leaf(nodes, ctx)

    def leaf(self, nodes, ctx: str) -> Node:
        idents = all(n.type == "Identifier" for n in nodes)
        if ctx in ("ident", "decl") or (ctx == "lhs" and idents):
            if not idents:
                raise NoGeneralizationError("an identifier position holds other code")
            return self.metavar(nodes, "identifier")
        leaves = all(n.type in ("Identifier", "Literal") for n in nodes)
        if (ctx in ("expr", "lhs") or (ctx == "root" and leaves)) and all(n.is_expression for n in nodes):
            kind = "constant" if all(n.type == "Literal" for n in nodes) else "expression"
            return self.metavar(nodes, kind)
        if ctx == "type" and all(n.type in TYPE_TYPES for n in nodes):
            return self.metavar(nodes, "type")
        raise NoGeneralizationError(f"cannot abstract {sorted({n.type for n in nodes})} here")


def generalize_terms(terms: list[Node]) -> tuple[Node, list[MetavarDecl]]:
    """Template matching every term, with metavariables where the terms differ."""
    if not terms:
        raise ValueError("need at least one term")
    roots = {t.type for t in terms}
    if len(roots) > 1:
        raise NoGeneralizationError(f"mixed root node types: {sorted(roots)}")
    g = Generalizer()
    template = g.gen(list(terms), "root")
    return template, [MetavarDecl(n, k) for n, k in g.kinds.items()]


# -- change extraction ---------------------------------------------------------


@dataclass
class Change:
    kind: str  # "expr" | "stmt"
    removed: tuple = ()
    added: tuple = ()
    prev: Node | None = None
    next: Node | None = None
    earlier: tuple = ()  # statements before the change in its block, nearest first

    def signature(self) -> tuple:
        return (
            self.kind,
            tuple(n.type for n in self.removed),
            tuple(n.type for n in self.added),
        )


def _body(stmt: Node) -> list[Node]:
    return list(stmt.children) if stmt.type == "CompoundStmt" else [stmt]


def _minimal_pair(b: Node, a: Node, parent: Node | None = None) -> tuple[Node, Node] | None:
    """Smallest differing expression pair below two statements, if there is one."""
    if b.type != a.type or b.label != a.label or len(b.children) != len(a.children):
        if b.is_expression and a.is_expression:
            return b, a
        return None
    diff = [i for i, (x, y) in enumerate(zip(b.children, a.children)) if x.key() != y.key()]
    if len(diff) != 1:
        return (b, a) if b.is_expression else None
    i = diff[0]
    if b.type == "CallExpr" and i == 0:
        return b, a
    if b.type == "FieldAccess" and i == 1:
        return b, a
    x, y = b.children[i], a.children[i]
    if x.is_statement or y.is_statement:
        return None
    return _minimal_pair(x, y, b)


def _block_change(bs: list[Node], as_: list[Node]) -> Change | None:
    sm = SequenceMatcher(None, [s.key() for s in bs], [s.key() for s in as_], autojunk=False)
    ops = [op for op in sm.get_opcodes() if op[0] != "equal"]
    if not ops:
        return None
    i1, i2 = ops[0][1], ops[-1][2]
    j1, j2 = ops[0][3], ops[-1][4]
    if len(ops) == 1 and i2 - i1 == 1 and j2 - j1 == 1:
        b, a = bs[i1], as_[j1]
        if b.type == a.type and b.type in ("IfStmt", "WhileStmt", "ForStmt", "CompoundStmt"):
            inner = _compound_change(b, a)
            if inner is not None:
                return inner
        if b.type == a.type and b.type != "CompoundStmt":
            pair = _minimal_pair(b, a)
            if pair is not None:
                return Change("expr", (pair[0],), (pair[1],))
    return Change(
        "stmt",
        tuple(bs[i1:i2]),
        tuple(as_[j1:j2]),
        bs[i1 - 1] if i1 > 0 else None,
        bs[i2] if i2 < len(bs) else None,
        tuple(reversed(bs[:i1])),
    )


def _compound_change(b: Node, a: Node) -> Change | None:
    if b.type == "CompoundStmt":
        return _block_change(list(b.children), list(a.children))
    if len(b.children) != len(a.children) or b.label != a.label:
        return None
    diff = [i for i, (x, y) in enumerate(zip(b.children, a.children)) if x.key() != y.key()]
    if len(diff) != 1:
        return None
    x, y = b.children[diff[0]], a.children[diff[0]]
    if not (x.is_statement and y.is_statement):
        return None  # condition change: handled as an expression pair
    return _block_change(_body(x), _body(y))


def extract_change(example: ExamplePair) -> Change | None:
    before, after = example.units()
    bf = {f.children[1].label: f for f in before.functions()}
    af = {f.children[1].label: f for f in after.functions()}
    changed = [n for n in bf if n in af and bf[n].key() != af[n].key()]
    if len(changed) != 1 or set(bf) != set(af):
        return None
    return _block_change(list(bf[changed[0]].children[-1].children), list(af[changed[0]].children[-1].children))


# -- rule construction ---------------------------------------------------------


def _declared(stmt: Node) -> set[str]:
    names = set()
    if stmt.type == "DeclStmt":
        for d in stmt.children[1:]:
            while d.type in ("PointerType", "AssignExpr", "IndexExpr"):
                d = d.children[0]
            if d.type == "Identifier":
                names.add(d.label)
    elif stmt.type == "ExprStmt" and stmt.children and stmt.children[0].type == "AssignExpr":
        lhs = stmt.children[0].children[0]
        if lhs.type == "Identifier":
            names.add(lhs.label)
    return names


def _metavars_in(node: Node, kinds: dict) -> set[str]:
    return {n.label for n in node.walk() if n.type in ("Identifier", "TypeName") and n.label in kinds}


def _rename(node: Node, names: dict) -> Node:
    if not node.children and node.type in ("Identifier", "TypeName") and node.label in names:
        return Node(node.type, (), names[node.label])
    return Node(node.type, [_rename(c, names) for c in node.children], node.label)


def _terms_of(body: list):
    for e in body:
        if isinstance(e, (Context, Minus, Plus)):
            yield e.term.node
        elif isinstance(e, Dots):
            for t in e.forbidden:
                yield t.node


def _finish(g: Generalizer, body: list) -> GenericPatchRule:
    """Validated rule; metavariables renamed per kind in order of first use."""
    order: list[str] = []
    for node in _terms_of(body):
        for n in node.walk():
            if n.type in ("Identifier", "TypeName") and n.label in g.kinds and n.label not in order:
                order.append(n.label)
    counts: Counter = Counter()
    names = {}
    for old in order:
        prefix = _PREFIX[g.kinds[old]]
        names[old] = f"{prefix}{counts[prefix]}"
        counts[prefix] += 1
    new_body = []
    for e in body:
        if isinstance(e, Dots):
            new_body.append(Dots(tuple(WhenNot(Term(_rename(t.node, names))) for t in e.forbidden)))
        else:
            new_body.append(type(e)(Term(_rename(e.term.node, names))))
    decls = tuple(MetavarDecl(names[n], g.kinds[n]) for n in order)
    rule = GenericPatchRule("rule", decls, tuple(new_body), None, "exists")
    if any(i.severity == "error" for i in validate_rule(rule)):
        raise NoGeneralizationError("the generalized rule is not valid")
    return rule


def build_rule(changes: list[Change]) -> GenericPatchRule:
    """One rule covering every change, or NoGeneralizationError."""
    sigs = {c.signature() for c in changes}
    if len(sigs) != 1:
        raise NoGeneralizationError("changes of different shapes")
    kind = changes[0].kind
    g = Generalizer()
    if kind == "expr":
        minus = g.gen([c.removed[0] for c in changes])
        plus = g.gen([c.added[0] for c in changes], "expr")
        return _finish(g, [Minus(Term(minus)), Plus(Term(plus))])
    n_rem = len(changes[0].removed)
    removed = [Minus(Term(g.gen([c.removed[i] for c in changes]))) for i in range(n_rem)]
    if removed:
        added = [Plus(Term(g.gen([c.added[j] for c in changes]))) for j in range(len(changes[0].added))]
        return _finish(g, removed + added)
    return _insertion_rule(changes, g)


def _insertion_rule(changes: list[Change], g: Generalizer) -> GenericPatchRule:
    errors = []
    for side in ("next", "prev"):
        anchors = [getattr(c, side) for c in changes]
        if any(a is None for a in anchors):
            continue
        snap = g.snapshot()
        try:
            added = [g.gen([c.added[j] for c in changes]) for j in range(len(changes[0].added))]
            anchor = g.gen(anchors)
        except NoGeneralizationError as exc:
            g.restore(snap)
            errors.append(str(exc))
            continue
        core = [Plus(Term(a)) for a in added]
        core = core + [Context(Term(anchor))] if side == "next" else [Context(Term(anchor))] + core
        lead = _definition_anchor(changes, g, side)
        try:
            return _finish(g, lead + core)
        except NoGeneralizationError as exc:
            g.restore(snap)
            errors.append(str(exc))
    raise NoGeneralizationError("; ".join(errors) or "no statement to anchor the insertion")


def _definition_anchor(changes: list[Change], g: Generalizer, side: str) -> list:
    """Earlier statement defining a metavariable used by the change, plus the gap."""
    for name, values in list(g.values.items()):
        if not all(v.type == "Identifier" for v in values):
            continue
        found = []
        for c, v in zip(changes, values):
            earlier = c.earlier[1:] if side == "prev" else c.earlier
            hit = next(((k, s) for k, s in enumerate(earlier) if v.label in _declared(s)), None)
            if hit is None:
                break
            found.append(hit)
        if len(found) != len(changes):
            continue
        snap = g.snapshot()
        try:
            anchor = g.gen([s for _, s in found])
        except NoGeneralizationError:
            g.restore(snap)
            continue
        lead = [Context(Term(anchor))]
        if any(k > 0 for k, _ in found):
            guards = tuple(
                WhenNot(Term(Node("AssignExpr", (Node("Identifier", (), m), Node("Identifier", (), WILDCARD_VALUE)), "=")))
                for m in sorted(_metavars_in(anchor, g.kinds))
                if g.kinds[m] == "identifier"
            )
            lead.append(Dots(guards))
        return lead
    return []


# -- scoring -------------------------------------------------------------------


def _changed_lines(diff: str) -> Counter:
    out: Counter = Counter()
    for line in diff.splitlines():
        if line.startswith(("+++", "---")) or not line[:1] in ("+", "-"):
            continue
        out[(line[0], " ".join(line[1:].split()))] += 1
    return out


def _produced(gp: GenericPatch, ex: ExamplePair) -> str:
    try:
        text, _ = apply_patchset(gp, ex.units()[0])
    except ApplicationError:
        return ""
    return unified_diff(ex.before, text, ex.file or "fragment.c")


def score(gp: GenericPatch, examples: list[ExamplePair]) -> tuple[float, float]:
    """(recall, precision) over changed lines, whitespace-normalized."""
    expected: Counter = Counter()
    produced: Counter = Counter()
    hit = 0
    for ex in examples:
        exp = _changed_lines(ex.expected_diff)
        got = _changed_lines(_produced(gp, ex))
        expected += exp
        produced += got
        hit += sum((exp & got).values())
    n_exp, n_got = sum(expected.values()), sum(produced.values())
    recall = hit / n_exp if n_exp else 0.0
    precision = hit / n_got if n_got else 0.0
    return recall, precision


# -- driver --------------------------------------------------------------------


def _dedupe_key(ex: ExamplePair) -> tuple:
    return (ex.before, ex.after)


def infer(cluster, examples: list[ExamplePair], timeout: float = DEFAULT_TIMEOUT) -> InferenceResult:
    """Generic patch for a cluster of examples.

    ``cluster`` supplies the patch id (any object with ``cluster_id``, or a
    string).  Work stops at the deadline; rules finished before it are kept.
    """
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    started = time.monotonic()
    deadline = started + timeout

    def tick():
        if time.monotonic() > deadline:
            raise _Timeout

    patch_id = getattr(cluster, "cluster_id", None) or (cluster if isinstance(cluster, str) else "patch")
    uncovered: list[str] = []
    groups: list[tuple[list[Change], list[ExamplePair], GenericPatchRule]] = []
    rules: list[GenericPatchRule] = []
    stats: list[PatchStats] = []
    members: list[list[ExamplePair]] = []
    timed_out = False
    try:
        seen: dict[tuple, int] = {}
        duplicates: dict[int, list[ExamplePair]] = {}
        unique: list[tuple[ExamplePair, Change]] = []
        for ex in sorted(examples, key=lambda e: e.hunk_id):
            tick()
            key = _dedupe_key(ex)
            if key in seen:
                duplicates.setdefault(seen[key], []).append(ex)
                continue
            try:
                change = extract_change(ex)
            except Exception:  # unparsable fragment
                change = None
            if change is None:
                uncovered.append(ex.hunk_id)
                continue
            seen[key] = len(unique)
            unique.append((ex, change))
        for idx, (ex, change) in enumerate(unique):
            tick()
            for k, (chs, exs, _) in enumerate(groups):
                try:
                    rule = build_rule(chs + [change])
                except NoGeneralizationError:
                    continue
                groups[k] = (chs + [change], exs + [ex] + duplicates.get(idx, []), rule)
                break
            else:
                try:
                    rule = build_rule([change])
                except NoGeneralizationError:
                    uncovered.append(ex.hunk_id)
                    continue
                groups.append(([change], [ex] + duplicates.get(idx, []), rule))
        for chs, exs, rule in groups:
            tick()
            rule = GenericPatchRule(f"rule_{len(rules)}", rule.metavars, rule.body, None, "exists")
            recall, precision = score(GenericPatch(patch_id, (rule,)), exs)
            tick()  # a rule scored past the deadline is not kept
            if recall <= 0:
                uncovered += [e.hunk_id for e in exs]
                continue
            rules.append(rule)
            stats.append(PatchStats(recall, precision))
            members.append(exs)
    except _Timeout:
        timed_out = True
    patches: list[GenericPatch] = []
    if rules:
        prov = tuple(
            dict(ex.provenance(), rule=i) if len(rules) > 1 else ex.provenance()
            for i, exs in enumerate(members)
            for ex in exs
        )
        covered = [ex for exs in members for ex in exs]
        gp = GenericPatch(patch_id, tuple(rules), prov, rule_stats=tuple(stats) if len(rules) > 1 else ())
        if len(rules) == 1:
            gp.stats = stats[0]
        elif not timed_out:
            r, p = score(gp, covered)
            gp.stats = PatchStats(r, p)
        else:
            gp.stats = PatchStats(
                sum(s.recall for s in stats) / len(stats), sum(s.precision for s in stats) / len(stats)
            )
        patches.append(gp)
    if timed_out:
        done = {ex.hunk_id for exs in members for ex in exs}
        uncovered = sorted({e.hunk_id for e in examples} - done)
    return InferenceResult(patches, sorted(set(uncovered)), time.monotonic() - started, timed_out)
