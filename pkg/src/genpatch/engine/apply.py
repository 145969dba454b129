"""Turn match sites into source edits and unified diffs.

Removed terms lose their source lines, added terms are instantiated under the
site's binding and inserted next to the term they are attached to:

* right after a removed term: they replace it;
* otherwise before the nearest following matched term;
* otherwise after the nearest preceding matched term;
* otherwise at the start (or, after dots, the end) of the function body.

Bound code is copied from the original source text, so untouched formatting
survives instantiation.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from ..lang.ast import AstUnit, Node, is_void_function
from ..lang.parser import parse_unit
from ..lang.printer import INDENT, apply_edits, needs_parens, render_expr, render_stmt
from ..smpl.model import Context, Disjunction, Dots, GenericPatch, GenericPatchRule, Minus, Plus
from .match import MatchSite, TermMatch, match_rule


class ApplicationError(RuntimeError):
    """A site cannot be rewritten into well-formed code."""


@dataclass(frozen=True)
class ConcretePatch:
    diff: str
    patch_id: str
    rule_name: str
    site_digest: str
    target_file: str
    patched_text: str
    warnings: tuple[str, ...] = ()

    @property
    def origin(self) -> tuple[str, str, str]:
        return (self.patch_id, self.rule_name, self.site_digest)

    @property
    def empty(self) -> bool:
        return not self.diff


@dataclass
class RuleReport:
    rule_name: str
    sites: list[str] = field(default_factory=list)  # site digests
    warnings: list[str] = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return bool(self.sites)


@dataclass
class PatchsetReport:
    rules: list[RuleReport] = field(default_factory=list)

    @property
    def site_count(self) -> int:
        return sum(len(r.sites) for r in self.rules)

    @property
    def unmatched_rules(self) -> list[str]:
        return [r.rule_name for r in self.rules if not r.matched]

    @property
    def warnings(self) -> list[str]:
        return [w for r in self.rules for w in r.warnings]


def unified_diff(old: str, new: str, path: str) -> str:
    if old == new:
        return ""
    path = path.lstrip("/")
    lines = difflib.unified_diff(
        old.splitlines(keepends=True), new.splitlines(keepends=True), f"a/{path}", f"b/{path}"
    )
    out = []
    for line in lines:
        out.append(line if line.endswith("\n") else line + "\n\\ No newline at end of file\n")
    return "".join(out)


# -- instantiation -------------------------------------------------------------


def _metavar_name(n: Node, kinds: dict) -> str | None:
    if n.type in ("Identifier", "TypeName") and n.label in kinds:
        return n.label
    if n.type == "Param" and len(n.children) == 1 and n.children[0].type == "TypeName":
        if kinds.get(n.children[0].label) == "parameter":
            return n.children[0].label
    if n.type == "ExprStmt" and len(n.children) == 1 and n.children[0].type == "Identifier":
        if kinds.get(n.children[0].label) == "statement":
            return n.children[0].label
    return None


def instantiate(node: Node, rule: GenericPatchRule, site: MatchSite, source: str, warnings: list) -> list[str]:
    """Lines of ``node`` with metavariables replaced by the bound source text."""
    kinds = rule.kinds()
    markers: dict[str, str] = {}
    void = is_void_function(site.function)

    def clone(n: Node, parent: Node | None, idx: int) -> Node:
        name = _metavar_name(n, kinds)
        if name is not None:
            value = site.binding.get(name)
            if value is None or not hasattr(value, "node"):
                raise ApplicationError(f"metavariable {name!r} is not bound at this site")
            bound = value.node
            text = source[bound.start : bound.end] if bound.tokens else render_expr(bound)
            if bound.is_expression and needs_parens(bound, parent, idx):
                text = f"({text})"
            marker = f"__gp{len(markers)}__"
            markers[marker] = text
            if n.type == "ExprStmt":
                return Node("ExprStmt", (Node("Identifier", (), marker),), "metavar")
            if n.type == "Param":
                return Node("Param", (Node("TypeName", (), marker),))
            return Node(n.type, (), marker)
        if n.type == "ReturnStmt" and not n.children and not void:
            warnings.append("bare return in a value-returning function was instantiated as 'return 0;'")
            return Node("ReturnStmt", (Node("Literal", (), "0"),))
        return Node(n.type, [clone(c, n, i) for i, c in enumerate(n.children)], n.label)

    inst = clone(node, None, 0)
    lines = render_stmt(inst) if inst.is_statement else [render_expr(inst)]
    text = "\n".join(lines)
    # longest markers first so __gp1__ never clobbers __gp10__
    for marker in sorted(markers, key=len, reverse=True):
        text = text.replace(marker, markers[marker])
    return text.split("\n")


# -- attaching added code ------------------------------------------------------


@dataclass
class _StmtOp:
    node: Node
    before: list = field(default_factory=list)  # list of line-lists, one per statement
    after: list = field(default_factory=list)
    remove: bool = False
    replace: list = field(default_factory=list)


def _sequence(rule: GenericPatchRule, site: MatchSite) -> list[tuple]:
    """Rule elements along the matched path: ("term", elem, TermMatch) | ("plus", elem) | ("dots",)."""
    by_pos: dict[tuple, TermMatch] = {m.pos: m for m in site.matches}
    seq: list[tuple] = []
    i = 0
    for e in rule.body:
        if isinstance(e, Plus):
            seq.append(("plus", e))
            continue
        if isinstance(e, (Context, Minus)):
            seq.append(("term", e, by_pos[(i, -1, 0)]))
        elif isinstance(e, Dots):
            seq.append(("dots",))
        elif isinstance(e, Disjunction):
            k = next(p[1] for p in by_pos if p[0] == i)
            m = 0
            for x in e.branches[k]:
                if isinstance(x, Plus):
                    seq.append(("plus", x))
                else:
                    seq.append(("term", x, by_pos[(i, k, m)]))
                    m += 1
        i += 1
    return seq


class _Editor:
    def __init__(self, rule: GenericPatchRule, unit: AstUnit, site: MatchSite):
        self.rule = rule
        self.unit = unit
        self.src = unit.source
        self.site = site
        self.cfg = unit.cfg(site.function)
        self.warnings: list[str] = []
        self.ops: dict[int, _StmtOp] = {}
        self.expr_edits: list[tuple[int, int, str]] = []
        self.replaced: set[TermMatch] = set()
        self.parent: dict[int, tuple[Node, int]] = {}
        for n in site.function.walk():
            for i, c in enumerate(n.children):
                self.parent[id(c)] = (n, i)

    # source geometry
    def line_start(self, off: int) -> int:
        return self.src.rfind("\n", 0, off) + 1

    def line_end(self, off: int) -> int:
        k = self.src.find("\n", off)
        return len(self.src) if k < 0 else k

    def indent_of(self, off: int) -> str:
        ls = self.line_start(off)
        line = self.src[ls : self.line_end(ls)]
        return line[: len(line) - len(line.lstrip())]

    def starts_line(self, n: Node) -> bool:
        return not self.src[self.line_start(n.start) : n.start].strip()

    def ends_line(self, n: Node) -> bool:
        return not self.src[n.end : self.line_end(n.end)].strip()

    def op(self, stmt: Node) -> _StmtOp:
        got = self.ops.get(id(stmt))
        if got is None:
            got = self.ops[id(stmt)] = _StmtOp(stmt)
        return got

    def owner(self, tm: TermMatch) -> Node:
        cn = self.cfg.nodes[tm.cfg_node]
        return cn.owner if cn.owner is not None else cn.ast

    def unbraced(self, stmt: Node) -> bool:
        parent, idx = self.parent.get(id(stmt), (None, 0))
        if parent is None:
            return False
        t = parent.type
        return (t == "IfStmt" and idx in (1, 2)) or (t == "WhileStmt" and idx == 1) or (
            t == "ForStmt" and idx == len(parent.children) - 1
        )

    # planning
    def plan(self) -> None:
        seq = _sequence(self.rule, self.site)
        k = 0
        while k < len(seq):
            if seq[k][0] != "plus":
                k += 1
                continue
            end = k
            while end < len(seq) and seq[end][0] == "plus":
                end += 1
            block = [self.render_plus(e[1]) for e in seq[k:end]]
            self.attach(seq, k, end, block)
            k = end
        for entry in seq:
            if entry[0] == "term" and isinstance(entry[1], Minus) and entry[2] not in self.replaced:
                self.remove(entry[2], [])

    def render_plus(self, elem: Plus) -> tuple[bool, list[str]]:
        node = elem.term.node
        return node.is_statement, instantiate(node, self.rule, self.site, self.src, self.warnings)

    def attach(self, seq, k: int, end: int, block) -> None:
        prev = seq[k - 1] if k > 0 else None
        if prev is not None and prev[0] == "term" and isinstance(prev[1], Minus):
            self.remove(prev[2], block)
            self.replaced.add(prev[2])
            return
        after_dots = any(e[0] == "dots" for e in seq[:k])
        following = next((e for e in seq[end:] if e[0] == "term"), None)
        if following is not None:
            self.insert(following[2], block, before=True)
            return
        preceding = next((e for e in reversed(seq[:k]) if e[0] == "term"), None)
        if preceding is not None:
            self.insert(preceding[2], block, before=False)
            return
        if self.rule.header is None:
            raise ApplicationError("added code has no term to attach to")
        self.insert_in_body(block, at_end=after_dots)

    def _statements_only(self, block) -> list[list[str]]:
        if not all(is_stmt for is_stmt, _ in block):
            raise ApplicationError("an added expression can only replace a removed expression")
        return [lines for _, lines in block]

    def insert(self, tm: TermMatch, block, before: bool) -> None:
        stmt = tm.node if tm.node.is_statement else self.owner(tm)
        stmts = self._statements_only(block)
        target = self.op(stmt)
        (target.before if before else target.after).extend(stmts)

    def insert_in_body(self, block, at_end: bool) -> None:
        body = self.site.function.children[-1]
        stmts = self._statements_only(block)
        if body.children:
            target = self.op(body.children[-1] if at_end else body.children[0])
            (target.after if at_end else target.before).extend(stmts)
            return
        brace = body.tokens[0].end
        text = "".join("\n" + INDENT + line for s in stmts for line in s)
        if not self.src[brace:].startswith("\n"):
            text += "\n"
        self.expr_edits.append((brace, brace, text))

    def remove(self, tm: TermMatch, block) -> None:
        node = tm.node
        if node.is_statement:
            target = self.op(node)
            target.remove = True
            target.replace.extend(self._statements_only(block))
            return
        if block and not any(is_stmt for is_stmt, _ in block):
            text = " ".join(line.strip() for _, lines in block for line in lines)
            self.expr_edits.append((node.start, node.end, text))
            return
        owner = self.owner(tm)
        if owner.type == "ExprStmt" and owner.children and owner.children[0] is node:
            target = self.op(owner)
            target.remove = True
            target.replace.extend(self._statements_only(block))
            return
        raise ApplicationError(f"cannot remove the sub-expression at offset {node.start}")

    # edit generation
    def edits(self) -> list[tuple[int, int, str]]:
        self.plan()
        out: list[tuple[int, int, str]] = []
        inner = list(self.expr_edits)
        claimed: set[int] = set()
        for op in self.ops.values():
            out += self.stmt_edits(op, inner, claimed)
        out += [e for i, e in enumerate(inner) if i not in claimed]
        return out

    def _inside(self, node: Node, inner, claimed) -> list[tuple[int, int, str]]:
        got = []
        for i, (s, e, t) in enumerate(inner):
            if i not in claimed and node.start <= s and e <= node.end:
                claimed.add(i)
                got.append((s - node.start, e - node.start, t))
        return got

    def stmt_edits(self, op: _StmtOp, inner, claimed) -> list[tuple[int, int, str]]:
        s = op.node
        keep = not op.remove
        count = len(op.before) + len(op.after) + len(op.replace) + (1 if keep else 0)
        if keep and not op.before and not op.after:
            return []
        if self.unbraced(s) and count != 1:
            return [self.braced(op, inner, claimed)]
        if op.remove:
            self._inside(s, inner, claimed)  # edits inside a removed statement are moot
            stmts = op.before + op.replace + op.after
            if self.starts_line(s) and self.ends_line(s) and not self.unbraced(s):
                ls, le = self.line_start(s.start), self.line_end(s.end)
                indent = self.indent_of(s.start)
                text = "".join(indent + line + "\n" for st in stmts for line in st)
                return [(ls, min(le + 1, len(self.src)), text)]
            flat = " ".join(line.strip() for st in stmts for line in st)
            return [(s.start, s.end, flat or ";")]
        out = []
        indent = self.indent_of(s.start)
        if op.before:
            if self.starts_line(s):
                ls = self.line_start(s.start)
                out.append((ls, ls, "".join(indent + line + "\n" for st in op.before for line in st)))
            else:
                out.append((s.start, s.start, " ".join(line.strip() for st in op.before for line in st) + " "))
        if op.after:
            if self.ends_line(s):
                le = self.line_end(s.end)
                text = "".join(indent + line + "\n" for st in op.after for line in st)
                if le == len(self.src):
                    out.append((le, le, "\n" + text.rstrip("\n")))
                else:
                    out.append((le + 1, le + 1, text))
            else:
                out.append((s.end, s.end, " " + " ".join(line.strip() for st in op.after for line in st)))
        return out

    def braced(self, op: _StmtOp, inner, claimed) -> tuple[int, int, str]:
        s = op.node
        parent, _ = self.parent[id(s)]
        outer = self.indent_of(parent.start)
        ind = outer + INDENT
        toks = self.unit.tokens
        idx = next(i for i, t in enumerate(toks) if t.offset == s.start)
        lead = toks[idx - 1].end
        body = []
        for st in op.before:
            body += [ind + line for line in st]
        if op.remove:
            self._inside(s, inner, claimed)
            for st in op.replace:
                body += [ind + line for line in st]
        else:
            own = apply_edits(self.src[s.start : s.end], self._inside(s, inner, claimed))
            body.append(ind + own)
        for st in op.after:
            body += [ind + line for line in st]
        return (lead, s.end, " {\n" + "\n".join(body) + "\n" + outer + "}")


def _site_edits(rule: GenericPatchRule, unit: AstUnit, site: MatchSite) -> tuple[list, list[str]]:
    ed = _Editor(rule, unit, site)
    edits = ed.edits()
    return edits, ed.warnings


def _opaque_count(unit: AstUnit) -> int:
    return sum(1 for n in unit.root.walk() if n.type == "OpaqueStmt")


def _checked(text: str, before: AstUnit) -> AstUnit:
    after = parse_unit(text, before.path)
    if _opaque_count(after) > _opaque_count(before) or (after.degenerate and not before.degenerate):
        raise ApplicationError("patched text does not parse")
    return after


def _merge(edits: list, taken: list) -> bool:
    """Add ``edits`` to ``taken`` unless they clash; identical edits are shared."""
    fresh = [e for e in edits if e not in taken]
    for s, e, _ in fresh:
        for ts, te, _t in taken:
            if s < te and ts < e or (s == e == ts == te):
                return False
            if s == e and ts < s < te or ts == te and s < ts < e:
                return False
    taken += fresh
    return True


def apply_rule(rule: GenericPatchRule, unit: AstUnit, site: MatchSite, patch_id: str = "patch") -> ConcretePatch:
    """Concrete patch for one match site."""
    edits, warnings = _site_edits(rule, unit, site)
    try:
        text = apply_edits(unit.source, edits)
    except ValueError as exc:
        raise ApplicationError(str(exc)) from exc
    if text != unit.source:
        _checked(text, unit)
    return ConcretePatch(
        unified_diff(unit.source, text, unit.path),
        patch_id,
        rule.name,
        site.digest,
        unit.path,
        text,
        tuple(dict.fromkeys(warnings)),
    )


def apply_patchset(gp: GenericPatch, unit: AstUnit) -> tuple[str, PatchsetReport]:
    """Apply every rule in order, each to the output of the previous one."""
    report = PatchsetReport()
    current = unit
    for rule in gp.rules:
        rr = RuleReport(rule.name)
        report.rules.append(rr)
        taken: list = []
        for site in match_rule(rule, current):
            try:
                edits, warnings = _site_edits(rule, current, site)
            except ApplicationError as exc:
                rr.warnings.append(f"site {site.digest}: {exc}")
                continue
            if not _merge(edits, taken):
                rr.warnings.append(f"site {site.digest}: edits overlap an earlier site, skipped")
                continue
            rr.sites.append(site.digest)
            rr.warnings += [w for w in warnings if w not in rr.warnings]
        if taken:
            text = apply_edits(current.source, taken)
            current = _checked(text, current)
    return current.source, report
