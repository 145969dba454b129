"""Matching and application of generic patches."""

from .apply import ApplicationError, ConcretePatch, PatchsetReport, RuleReport, apply_patchset, apply_rule, unified_diff
from .match import DegenerateRuleError, MatchSite, TermMatch, match_rule
from .oracle import brute_force_match
from .terms import Binding, Bound

__all__ = [
    "ApplicationError",
    "Binding",
    "Bound",
    "ConcretePatch",
    "DegenerateRuleError",
    "MatchSite",
    "PatchsetReport",
    "RuleReport",
    "TermMatch",
    "apply_patchset",
    "apply_rule",
    "brute_force_match",
    "match_rule",
    "unified_diff",
]
