"""Canonical text form of generic patches."""

from __future__ import annotations

from ..lang.ast import DOTS, Node
from ..lang.printer import INDENT, render_expr, render_param, render_stmt, render_type
from .model import (
    DEFAULT_QUANTIFIER,
    METAVAR_KINDS,
    Context,
    Disjunction,
    Dots,
    GenericPatch,
    GenericPatchRule,
    Minus,
    Plus,
    Term,
    WhenAny,
    WhenNot,
)

_PREFIX = {Context: "  ", Minus: "- ", Plus: "+ "}


def render_params(node: Node) -> str:
    return ", ".join("..." if p.type == DOTS else render_param(p) for p in node.children)


def term_lines(term: Term, indent: str = "") -> list[str]:
    node = term.node
    if node.is_statement:
        lines = render_stmt(node, indent)
        if term.position:
            last = lines[-1]
            if last.endswith(";"):
                lines[-1] = f"{last[:-1]}@{term.position};"
            else:
                lines[-1] = f"{last}@{term.position}"
        return lines
    text = indent + render_expr(node)
    return [f"{text}@{term.position}" if term.position else text]


def _when_text(w) -> str:
    if isinstance(w, WhenAny):
        return "when any"
    lines = term_lines(w.term)
    return "when != " + " ".join(line.strip() for line in lines)


def _elements(elems, indent: str) -> list[str]:
    out: list[str] = []
    for e in elems:
        if isinstance(e, Dots):
            if not e.whens:
                out.append(f"  {indent}...")
                continue
            texts = [_when_text(w) for w in e.whens]
            out.append(f"  {indent}... {texts[0]}")
            out += [f"  {indent}    {t}" for t in texts[1:]]
        elif isinstance(e, Disjunction):
            out.append(f"  {indent}(")
            for i, branch in enumerate(e.branches):
                if i:
                    out.append(f"  {indent}|")
                out += _elements(branch, indent)
            out.append(f"  {indent})")
        else:
            prefix = _PREFIX[type(e)]
            out += [prefix + line for line in term_lines(e.term, indent)]
    return out


def render_rule(rule: GenericPatchRule) -> str:
    head = rule.name
    if rule.quantifier != DEFAULT_QUANTIFIER:
        head = f"{head} {rule.quantifier}" if head else rule.quantifier
    lines = [f"@{head}@"]
    for kind in METAVAR_KINDS:
        names = [d.name for d in rule.metavars if d.kind == kind]
        if names:
            lines.append(f"{kind} {', '.join(names)};")
    lines.append("@@")
    if rule.header is not None:
        h = rule.header
        sig = f"{h.name.node.label}({render_params(h.params.node)})"
        if h.return_type is not None:
            ty = render_type(h.return_type.node)
            sig = f"{ty}{sig}" if ty.endswith("*") else f"{ty} {sig}"
        lines.append(sig + " {")
        lines += _elements(rule.body, INDENT)
        lines.append("}")
    else:
        lines += _elements(rule.body, "")
    return "\n".join(lines) + "\n"


def render_generic_patch(gp: GenericPatch) -> str:
    return "\n".join(render_rule(r) for r in gp.rules)
