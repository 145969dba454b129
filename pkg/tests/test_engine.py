import dataclasses
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from genpatch.engine import (
    ApplicationError,
    DegenerateRuleError,
    apply_patchset,
    apply_rule,
    brute_force_match,
    match_rule,
)
from genpatch.lang import parse_unit, tokenize
from genpatch.smpl import GenericPatchError, GenericPatchRule, parse_generic_patch

from randgen import random_rule, random_unit

DATA = Path(__file__).parent / "data"
LISTING1 = (DATA / "listing1.cocci").read_text()
LISTING2 = (DATA / "listing2.c").read_text()


def rule_of(text):
    return parse_generic_patch(text).rules[0]


def unit_of(src, path="u.c"):
    return parse_unit(src, path)


def label(binding, name):
    v = binding.get(name)
    return v.node.label if hasattr(v, "node") else v


def with_quantifier(rule, q):
    return dataclasses.replace(rule, quantifier=q)


# -- matching -------------------------------------------------------------------


def test_listing1_site_and_bindings():
    rule, unit = rule_of(LISTING1), unit_of(LISTING2, "listing2.c")
    (site,) = match_rule(rule, unit)
    assert {n: label(site.binding, n) for n in ("fn", "param", "fld", "T")} == {
        "fn": "get_age", "param": "pers", "fld": "age", "T": "struct person"
    }
    pos = site.binding.get("p")
    assert (pos.file, pos.line) == ("listing2.c", 6)
    assert site.witness and site.anchor_span[0] < site.anchor_span[1]


def test_checked_else_branch_has_no_site():
    src = LISTING2.replace("else\n    age = pers->age;", "else if (pers != NULL)\n    age = pers->age;")
    rule, unit = rule_of(LISTING1), unit_of(src)
    assert match_rule(rule, unit) == [] == brute_force_match(rule, unit)


def test_forall_on_listing2_has_no_site():
    rule = with_quantifier(rule_of(LISTING1), "forall")
    unit = unit_of(LISTING2)
    assert match_rule(rule, unit) == [] == brute_force_match(rule, unit)


def test_oracle_agrees_on_listing():
    rule, unit = rule_of(LISTING1), unit_of(LISTING2)
    assert set(match_rule(rule, unit)) == set(brute_force_match(rule, unit, bound=32))


def test_degenerate_rule():
    empty = GenericPatchRule("r", (), ())
    with pytest.raises(DegenerateRuleError):
        brute_force_match(empty, unit_of(LISTING2))
    with pytest.raises(DegenerateRuleError):
        match_rule(empty, unit_of(LISTING2))


def test_metavariable_consistency():
    rule = rule_of("@r exists@\nexpression E;\n@@\n- f(E, E)\n+ g(E)\n")
    unit = unit_of("void m(int a, int b) {\n    f(a, b);\n    f(a, a);\n}\n")
    (site,) = match_rule(rule, unit)
    assert site.binding.get("E").key == ("Identifier", "a", ())


def test_disjunction_first_branch_wins():
    rule = rule_of("@r exists@\nexpression E;\n@@\n(\n- f(E)\n+ g(E)\n|\n- f(E)\n+ h(E)\n)\n")
    text, _ = apply_patchset(parse_generic_patch("@r exists@\nexpression E;\n@@\n(\n- f(E)\n+ g(E)\n|\n- f(E)\n+ h(E)\n)\n"),
                             unit_of("void m(int a) {\n    f(a);\n}\n"))
    assert "g(a)" in text and "h(a)" not in text
    assert len(match_rule(rule, unit_of("void m(int a) {\n    f(a);\n}\n"))) == 1


def _pairs(seed, n):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        src, text = random_unit(rng), random_rule(rng)
        try:
            rule = rule_of(text)
        except GenericPatchError:
            continue
        out.append((rule, unit_of(src)))
    return out


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_equivalence(seed):
    for rule, unit in _pairs(seed, 3):
        assert set(match_rule(rule, unit)) == set(brute_force_match(rule, unit))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forall_sites_within_exists(seed):
    for rule, unit in _pairs(seed, 3):
        fa = set(match_rule(with_quantifier(rule, "forall"), unit))
        ex = set(match_rule(with_quantifier(rule, "exists"), unit))
        assert {s.identity()[:2] for s in fa} <= {s.identity()[:2] for s in ex}


def test_sites_are_in_source_order_and_disjoint():
    rule = rule_of("@r exists@\nexpression E;\n@@\n- f(E)\n+ g(E)\n")
    unit = unit_of("void m(int a) {\n    f(a);\n    f(f(a));\n    f(3);\n}\n")
    sites = match_rule(rule, unit)
    spans = [s.anchor_span for s in sites]
    assert spans == sorted(spans)
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


# -- application ----------------------------------------------------------------


def test_listing1_application():
    rule, unit = rule_of(LISTING1), unit_of(LISTING2, "listing2.c")
    (site,) = match_rule(rule, unit)
    cp = apply_rule(rule, unit, site, "l1")
    added = [l[1:].strip() for l in cp.diff.splitlines() if l.startswith("+") and not l.startswith("+++")]
    assert "if (pers == NULL)" in added and "return 0;" in added
    assert any("return 0" in w for w in cp.warnings)
    lines = cp.patched_text.splitlines()
    guard = lines.index("    if (pers == NULL)")
    assert lines[guard + 2].strip() == "age = pers->age;"
    assert cp.origin[:2] == ("l1", "unsafe_dereference")
    assert match_rule(rule, unit_of(cp.patched_text)) == []


def test_listing1_on_braced_branch_adds_exactly_two_lines():
    src = LISTING2.replace("else\n    age = pers->age;", "else {\n    age = pers->age;\n}")
    rule, unit = rule_of(LISTING1), unit_of(src)
    (site,) = match_rule(rule, unit)
    cp = apply_rule(rule, unit, site)
    body = [l for l in cp.diff.splitlines()[2:] if l[:1] in "+-"]
    assert body == ["+    if (pers == NULL)", "+        return 0;"]


def test_expression_replacement():
    rule = rule_of("@r exists@\nexpression E;\n@@\n- f(E)\n+ g(E)\n")
    unit = unit_of("int m(int x) {\n    return f(x+1);\n}\n")
    (site,) = match_rule(rule, unit)
    cp = apply_rule(rule, unit, site)
    assert [l for l in cp.diff.splitlines() if l[:1] in "+-" and l[:3] not in ("+++", "---")] == [
        "-    return f(x+1);", "+    return g(x+1);"
    ]


def test_instantiation_adds_parentheses():
    gp = parse_generic_patch("@r exists@\nexpression E;\n@@\n- E * 2\n+ E / 2\n")
    text, _ = apply_patchset(gp, unit_of("int m(int a, int b) {\n    return (a + b) * 2;\n}\n"))
    assert "return (a + b) / 2;" in text


def test_patchset_two_sites_one_diff():
    gp = parse_generic_patch("@r exists@\nexpression E;\n@@\n- f(E)\n+ g(E)\n")
    src = "void m(int a) {\n    f(a);\n    h();\n    f(2);\n}\n"
    text, report = apply_patchset(gp, unit_of(src))
    assert text.count("g(") == 2 and report.site_count == 2


def test_patchset_chained_rules():
    gp = parse_generic_patch(
        "@one exists@\nexpression E;\n@@\n- f(E)\n+ g(E)\n\n@two exists@\nexpression E;\n@@\n- g(E)\n+ h(E)\n"
    )
    text, report = apply_patchset(gp, unit_of("void m(int a) {\n    f(a);\n}\n"))
    assert "h(a);" in text and [len(r.sites) for r in report.rules] == [1, 1]
    parse_unit(text, "m.c")


def test_patchset_without_match():
    gp = parse_generic_patch("@r exists@\nexpression E;\n@@\n- nothere(E)\n+ g(E)\n")
    text, report = apply_patchset(gp, unit_of(LISTING2))
    assert text == LISTING2 and report.unmatched_rules == ["r"]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_patch_well_formedness(seed):
    for rule, unit in _pairs(seed, 3):
        for site in match_rule(rule, unit):
            try:
                cp = apply_rule(rule, unit, site)
            except ApplicationError:
                continue
            again = parse_unit(cp.patched_text, "u.c")
            assert again.source == cp.patched_text
            adds = any(type(e).__name__ == "Plus" for e in rule.elements())
            removes = any(type(e).__name__ == "Minus" for e in rule.elements())
            before, after = len(tokenize(unit.source)), len(tokenize(cp.patched_text))
            if removes and not adds:
                assert after < before
            if adds and not removes:
                assert after > before
