"""Static checks on generic-patch models."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..lang.ast import DOTS, Node
from .model import Context, Disjunction, Dots, GenericPatch, GenericPatchRule, Minus, Plus, Term


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    rule: str = ""


def _names_in(node: Node, declared: set[str]) -> set[str]:
    out = set()
    for n in node.walk():
        if n.type in ("Identifier", "TypeName") and n.label in declared:
            out.add(n.label)
    return out


def _skeleton_names(rule: GenericPatchRule, declared: set[str]) -> set[str]:
    names: set[str] = set()
    if rule.header is not None:
        for t in (rule.header.name, rule.header.params, rule.header.return_type):
            if t is not None:
                names |= _names_in(t.node, declared)
    for e in rule.elements():
        if isinstance(e, (Context, Minus)):
            names |= _names_in(e.term.node, declared)
            if e.term.position:
                names.add(e.term.position)
    return names


def _check_sequence(elems, rule: GenericPatchRule, issues: list, in_branch: bool) -> None:
    prev = None
    for e in elems:
        if isinstance(e, Dots):
            if in_branch:
                issues.append(Issue("error", "'...' is not supported inside a disjunction", e.line, rule.name))
            if isinstance(prev, Dots):
                issues.append(Issue("error", "'...' directly follows '...'", e.line, rule.name))
            for w in e.forbidden:
                if w.position:
                    issues.append(Issue("error", "position annotation inside a 'when' clause", e.line, rule.name))
        elif isinstance(e, Disjunction):
            if in_branch:
                issues.append(Issue("error", "nested disjunctions are not supported", e.line, rule.name))
            if len(e.branches) < 2:
                issues.append(Issue("error", "a disjunction needs at least two branches", e.line, rule.name))
            for branch in e.branches:
                if not any(isinstance(b, (Context, Minus)) for b in branch):
                    issues.append(Issue("error", "empty disjunction branch", e.line, rule.name))
                _check_sequence(branch, rule, issues, True)
        elif isinstance(e, Plus):
            if e.term.position:
                issues.append(Issue("error", "added code cannot carry a position annotation", e.line, rule.name))
            if any(n.type == DOTS for n in e.term.node.walk()):
                issues.append(Issue("error", "added code cannot contain '...'", e.line, rule.name))
        prev = e


def validate_rule(rule: GenericPatchRule) -> list[Issue]:
    issues: list[Issue] = []
    counts = Counter(d.name for d in rule.metavars)
    for name, n in counts.items():
        if n > 1:
            issues.append(Issue("error", f"metavariable {name!r} declared {n} times", 0, rule.name))
    declared = set(counts)
    kinds = rule.kinds()

    used: set[str] = set()
    for t in rule.terms():
        used |= _names_in(t.node, declared)
    for e in rule.elements():
        if isinstance(e, (Context, Minus, Plus)) and e.term.position:
            pos = e.term.position
            if pos not in declared:
                issues.append(Issue("error", f"undeclared metavariable {pos!r}", e.line, rule.name))
            elif kinds[pos] != "position":
                issues.append(Issue("error", f"metavariable {pos!r} is not a position", e.line, rule.name))
            used.add(pos)
    for d in rule.metavars:
        if d.kind == "position" and d.name in used:
            for t in rule.terms():
                if d.name in _names_in(t.node, {d.name}):
                    issues.append(Issue("error", f"position {d.name!r} used as code", t.line, rule.name))
    for d in rule.metavars:
        if d.name not in used:
            issues.append(Issue("warning", f"metavariable {d.name!r} is declared but never used", 0, rule.name))

    if rule.header is None and not any(isinstance(e, (Context, Minus, Dots, Disjunction)) for e in rule.body):
        issues.append(Issue("error", "no anchor context: the rule only adds code", 0, rule.name))
    _check_sequence(rule.body, rule, issues, False)

    bound = _skeleton_names(rule, declared)
    for e in rule.elements():
        if isinstance(e, Plus):
            for name in sorted(_names_in(e.term.node, declared) - bound):
                issues.append(
                    Issue("error", f"metavariable {name!r} appears only in added code", e.line, rule.name)
                )
    return issues


def validate(gp: GenericPatch | GenericPatchRule) -> list[Issue]:
    if isinstance(gp, GenericPatchRule):
        return validate_rule(gp)
    out: list[Issue] = []
    names = Counter(r.name for r in gp.rules if r.name)
    for name, n in names.items():
        if n > 1:
            out.append(Issue("error", f"rule name {name!r} used {n} times", 0, name))
    for rule in gp.rules:
        out += validate_rule(rule)
    return out
