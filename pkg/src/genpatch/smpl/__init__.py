"""Generic-patch notation: model, parser, renderer and validator."""

import re

from .model import (
    GRANULARITIES,
    METAVAR_KINDS,
    Context,
    Disjunction,
    Dots,
    FunctionHeader,
    GenericPatch,
    GenericPatchRule,
    MetavarDecl,
    Minus,
    PatchStats,
    Plus,
    Term,
    WhenAny,
    WhenNot,
)
from .parse import (
    GenericPatchError,
    PatternSyntaxError,
    PatternValidationError,
    UnsupportedConstructError,
    parse_generic_patch,
)
from .render import render_generic_patch, render_rule
from .validate import Issue, validate


def split_atomic(gp: GenericPatch) -> list[GenericPatch]:
    """One single-rule patch per rule; a single-rule patch is returned as is.

    Provenance rows tagged with a ``rule`` index follow their rule; untagged
    rows are shared.  Per-rule statistics replace the patch-level ones.
    """
    if gp.atomic:
        return [gp]
    out = []
    for i, rule in enumerate(gp.rules):
        prov = tuple(p for p in gp.provenance if p.get("rule", i) == i)
        stats = gp.rule_stats[i] if gp.rule_stats else gp.stats
        out.append(GenericPatch(f"{gp.patch_id}_{i}", (rule,), prov, stats))
    return out


def canonical_text(rule: GenericPatchRule) -> str:
    """Rendering with metavariables renamed by first use; equal iff equal up to renaming."""
    text = render_rule(rule)
    _, _, body = text.partition("@@\n")
    kinds = rule.kinds()
    names = [n for n in re.findall(r"[A-Za-z_]\w*", body) if n in kinds]
    order = list(dict.fromkeys(names))
    rename = {n: f"mv{i}" for i, n in enumerate(order)}
    body = re.sub(r"[A-Za-z_]\w*", lambda m: rename.get(m.group(0), m.group(0)), body)
    decls = sorted(f"{kinds[n]} {rename[n]};" for n in order)
    return f"@{rule.quantifier}@\n" + "\n".join(decls) + "\n@@\n" + body


__all__ = [
    "GRANULARITIES",
    "METAVAR_KINDS",
    "Context",
    "Disjunction",
    "Dots",
    "FunctionHeader",
    "GenericPatch",
    "GenericPatchError",
    "GenericPatchRule",
    "Issue",
    "MetavarDecl",
    "Minus",
    "PatchStats",
    "PatternSyntaxError",
    "PatternValidationError",
    "Plus",
    "Term",
    "UnsupportedConstructError",
    "WhenAny",
    "WhenNot",
    "canonical_text",
    "parse_generic_patch",
    "render_generic_patch",
    "render_rule",
    "split_atomic",
    "validate",
]
