import random

import pytest
from hypothesis import given, settings, strategies as st

from genpatch.editscript import (
    EditAction,
    RichEditScript,
    ScriptSyntaxError,
    diff_trees,
    parse_script,
    replay,
    serialize_script,
    shape_key,
)
from genpatch.lang import parse_unit

from randgen import random_unit


def script(before, after):
    return diff_trees(parse_unit(before, "b.c").root, parse_unit(after, "a.c").root)


def wrap(body):
    return "int f(int a, int b)\n{\n" + body + "}\n"


def test_operator_update():
    acts = script(wrap("    return a < b;\n"), wrap("    return a <= b;\n"))
    assert EditAction("UPD", 1, "BinaryExpr", "a < b", None, "a <= b") in acts
    assert all(a.kind == "UPD" for a in acts)


def test_identical_trees_give_no_actions():
    src = wrap("    return a;\n")
    assert script(src, src) == []


def test_statement_deletion():
    acts = script(wrap("    g();\n    return 0;\n"), wrap("    g();\n"))
    assert serialize_script(acts) == "DEL ReturnStmt @@ return 0 ; @AT@"


def test_grammar_text():
    assert EditAction("DEL", 0, "ReturnStmt", "return 0 ;").to_text() == "DEL ReturnStmt @@ return 0 ; @AT@"
    child = EditAction("INS", 1, "Literal", "0", "CallExpr", "f ( 0 )")
    assert child.to_text() == "---INS Literal @@ 0 @TO@ CallExpr @@ f ( 0 ) @AT@"


def test_empty_script_rejected():
    assert serialize_script([]) == ""
    with pytest.raises(ValueError):
        RichEditScript(())


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="DEL", depth=0, source_type="X", source_tokens="x", target_tokens="y"),
        dict(kind="UPD", depth=0, source_type="X", source_tokens="x"),
        dict(kind="MOV", depth=0, source_type="X", source_tokens="x", target_tokens="y"),
        dict(kind="ZAP", depth=0, source_type="X", source_tokens="x"),
        dict(kind="DEL", depth=-1, source_type="X", source_tokens="x"),
    ],
)
def test_action_invariants(kw):
    with pytest.raises(ValueError):
        EditAction(**kw)


def test_child_depth_is_parent_plus_one():
    acts = script(wrap("    foo(a);\n"), wrap("    foo(a, 0);\n"))
    for prev, cur in zip(acts, acts[1:]):
        assert cur.depth <= prev.depth + 1


def test_same_shape_for_different_callees():
    k1 = shape_key(script(wrap("    foo(a);\n"), wrap("    foo(a, 0);\n")))
    k2 = shape_key(script(wrap("    bar(b);\n"), wrap("    bar(b, 0);\n")))
    assert k1 == k2 and k1.digest == k2.digest


def test_kind_is_part_of_key():
    upd = shape_key([EditAction("UPD", 0, "ExprStmt", "a ;", None, "b ;")])
    delins = shape_key([EditAction("DEL", 0, "ExprStmt", "a ;"), EditAction("INS", 0, "ExprStmt", "b ;", "Block", "{ }")])
    assert upd != delins


def test_parse_errors():
    with pytest.raises(ScriptSyntaxError):
        parse_script("NOPE X @@ y @AT@")
    with pytest.raises(ScriptSyntaxError):
        parse_script("UPD X @@ a @AT@")


_TYPES = ["ExprStmt", "CallExpr", "BinaryExpr", "Identifier", "Literal", "ReturnStmt"]
_TOKS = st.text(alphabet="ab01 (+);-=>TO", min_size=0, max_size=12).map(lambda s: " ".join(s.split()))


@st.composite
def actions(draw):
    out, depth = [], 0
    for _ in range(draw(st.integers(1, 6))):
        depth = draw(st.integers(0, depth + 1)) if out else 0
        kind = draw(st.sampled_from(["MOV", "DEL", "INS", "UPD"]))
        src, typ = draw(_TOKS), draw(st.sampled_from(_TYPES))
        if kind == "DEL":
            out.append(EditAction(kind, depth, typ, src))
        elif kind == "UPD":
            out.append(EditAction(kind, depth, typ, src, None, draw(_TOKS)))
        else:
            out.append(EditAction(kind, depth, typ, src, draw(st.sampled_from(_TYPES)), draw(_TOKS)))
    return out


@settings(max_examples=300)
@given(actions())
def test_serialize_parse_bijective(acts):
    text = serialize_script(acts)
    assert parse_script(text).actions == tuple(acts)
    assert serialize_script(parse_script(text).actions) == text


def _mutate(rng, src):
    lines = src.splitlines(True)
    body = [i for i, l in enumerate(lines) if l.strip().endswith(";")]
    if not body:
        return src
    i = rng.choice(body)
    choice = rng.random()
    if choice < 0.3:
        del lines[i]
    elif choice < 0.6:
        lines.insert(i, lines[i].replace(lines[i].strip(), "h(c);"))
    elif choice < 0.8:
        lines[i] = lines[i].replace("a", "b", 1)
    else:
        j = rng.choice(body)
        lines[i], lines[j] = lines[j], lines[i]
    return "".join(lines)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_replay_soundness(seed):
    rng = random.Random(seed)
    before = random_unit(rng)
    after = before
    for _ in range(rng.randint(1, 3)):
        after = _mutate(rng, after)
    b, a = parse_unit(before, "b.c").root, parse_unit(after, "a.c").root
    assert replay(b, diff_trees(b, a)) == a.key()
