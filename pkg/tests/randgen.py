"""Random MiniC units and generic-patch rules for property tests."""

from __future__ import annotations

import random

VARS = ("a", "b", "c")
FUNCS = ("f", "g")


def _expr(rng: random.Random, depth: int = 0) -> str:
    r = rng.random()
    if depth > 1 or r < 0.4:
        return rng.choice(VARS + ("0", "1", "NULL"))
    if r < 0.6:
        return f"{rng.choice(FUNCS)}({_expr(rng, depth + 1)})"
    if r < 0.75:
        return f"{rng.choice(VARS)}->x"
    if r < 0.9:
        op = rng.choice(("+", "==", "!=", "&&", "||"))
        return f"{_expr(rng, depth + 1)} {op} {_expr(rng, depth + 1)}"
    return f"!{rng.choice(VARS)}"


def _stmts(rng: random.Random, budget: list[int], depth: int, indent: str) -> list[str]:
    out: list[str] = []
    n = rng.randint(1, 4)
    for _ in range(n):
        if budget[0] <= 0:
            break
        budget[0] -= 1
        r = rng.random()
        if depth < 2 and r < 0.2:
            out.append(f"{indent}if ({_expr(rng)}) {{")
            out += _stmts(rng, budget, depth + 1, indent + "    ")
            if rng.random() < 0.5:
                out.append(f"{indent}}} else {{")
                out += _stmts(rng, budget, depth + 1, indent + "    ")
            out.append(f"{indent}}}")
        elif depth < 2 and r < 0.3:
            out.append(f"{indent}while ({_expr(rng)}) {{")
            out += _stmts(rng, budget, depth + 1, indent + "    ")
            out.append(f"{indent}}}")
        elif r < 0.35:
            out.append(f"{indent}if ({rng.choice(VARS)} == NULL) return 0;")
        elif r < 0.55:
            out.append(f"{indent}{rng.choice(VARS)} = {_expr(rng)};")
        elif r < 0.75:
            out.append(f"{indent}{rng.choice(FUNCS)}({_expr(rng)});")
        elif r < 0.85:
            out.append(f"{indent}{rng.choice(VARS)}->x = {_expr(rng)};")
        else:
            out.append(f"{indent}return {_expr(rng)};")
    return out


def random_unit(rng: random.Random, max_statements: int = 12) -> str:
    """One function whose body has at most ``max_statements`` statements."""
    budget = [rng.randint(1, max_statements)]
    body: list[str] = []
    while budget[0] > 0:
        body += _stmts(rng, budget, 0, "    ")
    return "int fn(struct s *a, int b) {\n    int c;\n" + "\n".join(body) + "\n}\n"


def _pattern_expr(rng: random.Random) -> str:
    return rng.choice(("E", "I", "I->x", "f(E)", "g(I)", "E == NULL", "!I", "a", "f(a)", "I + 1"))


def _term(rng: random.Random) -> str:
    r = rng.random()
    if r < 0.2:
        return f"I = {_pattern_expr(rng)};"
    if r < 0.4:
        return f"{rng.choice(FUNCS)}({rng.choice(('E', 'I', 'a'))});"
    if r < 0.5:
        return "return E;"
    if r < 0.6:
        return "if (I == NULL) return 0;"
    if r < 0.7:
        return "I->x = E;"
    if r < 0.8:
        return "S"
    return _pattern_expr(rng)


def random_rule(rng: random.Random, max_elements: int = 4) -> str:
    """Text of a valid single rule with at most ``max_elements`` body elements."""
    quant = rng.choice(("exists", "forall"))
    header = rng.random() < 0.2
    n = rng.randint(1, max_elements)
    lines: list[str] = []
    prev_dots = False
    has_anchor = False
    for _ in range(n):
        r = rng.random()
        if not prev_dots and r < 0.35:
            w = rng.random()
            if w < 0.3:
                lines.append(f"... when != {rng.choice(('I', 'E', 'f(I)', 'I = E', 'I->x'))}")
            elif w < 0.4:
                lines.append("... when any")
            else:
                lines.append("...")
            prev_dots = True
            continue
        prev_dots = False
        has_anchor = True
        if r < 0.45:
            a, b = _term(rng), _term(rng)
            lines += ["(", a, "|", b, ")"]
            continue
        t = _term(rng)
        if r < 0.65 and t != "S":
            lines.append("- " + t)
            if rng.random() < 0.5:
                lines.append("+ h(0);" if t.endswith(";") else "+ h(0)")
        else:
            lines.append(t)
    if not has_anchor and not header:
        lines.append(_term(rng))
    decls = "expression E;\nidentifier I;\nstatement S;\n"
    if header:
        decls = "identifier fn;\n" + decls
        lines = ["fn(...) {"] + lines + ["}"]
    return f"@r {quant}@\n{decls}@@\n" + "\n".join(lines) + "\n"


# -- synthetic clusters for inference ------------------------------------------

CALLEES = ("fa", "fb", "fc", "fd", "fe")


def _template(rng: random.Random) -> tuple[str, list[str], list[str], str]:
    """(family, before lines, after lines, placement) with {E0}/{I0}/{T0} holes.

    Placement "expr" puts the before/after expression inside a host statement;
    "stmts" splices the lines into the function body.
    """
    f, g = rng.sample(CALLEES, 2)
    k = rng.choice(("0", "1", "NULL"))
    fam = rng.choice(("add_arg", "swap", "rename", "field", "nullcheck", "to_if", "delete", "insert", "guard"))
    if fam == "add_arg":
        return fam, [f"{f}({{E0}})"], [f"{f}({{E0}}, {k})"], "expr"
    if fam == "swap":
        return fam, [f"{f}({{E0}}, {{E1}})"], [f"{f}({{E1}}, {{E0}})"], "expr"
    if fam == "rename":
        return fam, [f"{f}({{E0}}, {k})"], [f"{g}({{E0}})"], "expr"
    if fam == "field":
        return fam, ["{E0}->len"], ["{E0}->size"], "expr"
    if fam == "nullcheck":
        return fam, ["{E0} == NULL"], ["!{E0}"], "expr"
    if fam == "to_if":
        return fam, [f"{f}({{E0}});"], [f"if ({{E0}} != NULL)", f"    {f}({{E0}});"], "stmts"
    if fam == "delete":
        n = rng.randint(1, 2)
        lines = [f"{f}({{E0}});", f"{g}({{E0}});"][:n]
        return fam, lines, [], "stmts"
    if fam == "insert":
        return fam, [f"{g}({{E0}});"], [f"{f}({{E0}});", f"{g}({{E0}});"], "stmts"
    return fam, ["{T0} *{I0} = " + f"{f}({{E0}});", "GAP", f"{g}({{I0}});"], [
        "{T0} *{I0} = " + f"{f}({{E0}});",
        "GAP",
        "if ({I0} == NULL)",
        "    return 0;",
        f"{g}({{I0}});",
    ], "stmts"


def _pattern_text(fam: str, before: list[str], after: list[str]) -> str:
    holes = {"E0": "E0", "E1": "E1", "I0": "I0", "T0": "T0"}
    b = [x.format(**holes) for x in before if x != "GAP"]
    a = [x.format(**holes) for x in after if x != "GAP"]
    decls = []
    joined = " ".join(b + a)
    for name, kind in (("T0", "type"), ("I0", "identifier"), ("E0", "expression"), ("E1", "expression")):
        if name in joined:
            decls.append(f"{kind} {name};")
    if fam in ("to_if", "delete"):
        body = ["- " + x for x in b] + ["+ " + x for x in a]
    elif fam == "insert":
        body = ["+ " + a[0], "  " + b[0]]
    elif fam == "guard":
        body = ["  " + b[0], "  ... when != I0 = any_value", "+ " + a[1], "+ " + a[2], "  " + b[1]]
    else:
        body = ["- " + b[0], "+ " + a[0]]
    return "@r exists@\n" + "\n".join(decls) + "\n@@\n" + "\n".join(body) + "\n"


_NOISE = (
    "n = n + 1;",
    "total = total * 2;",
    "trace_step(n);",
    "if (n > 3) {\n        n = 0;\n    }",
    "while (n < 2) {\n        n = n + 1;\n    }",
)


def random_cluster(rng: random.Random, size: int) -> tuple[str, list[tuple[str, str]]]:
    """A template and ``size`` (before, after) function pairs instantiating it."""
    fam, before, after, placement = _template(rng)
    pairs = []
    for i in range(size):
        holes = {
            "E0": f"p{i}x{rng.randint(0, 999)}",
            "E1": f"q{i}y{rng.randint(0, 999)}",
            "I0": f"v{i}z{rng.randint(0, 999)}",
            "T0": f"struct rec{i}",
        }
        gap = [rng.choice(_NOISE) for _ in range(rng.randint(1 if i == 0 else 0, 2))]
        pre = [rng.choice(_NOISE) for _ in range(rng.randint(0, 2))]
        post = [rng.choice(_NOISE) for _ in range(rng.randint(0, 2))]

        def lines(src: list[str]) -> list[str]:
            out = []
            for x in src:
                out += gap if x == "GAP" else [x.format(**holes)]
            return out

        b, a = lines(before), lines(after)
        if placement == "expr":
            host = rng.choice(("n = {};", "if ({}) {{\n        n = 1;\n    }}", "{};"))
            if host == "{};" and not b[0].split("(")[0].isidentifier():
                host = "n = {};"
            b, a = [host.format(b[0])], [host.format(a[0])]
        params = f"int n, int total, void *{holes['E0']}, void *{holes['E1']}"
        head = [f"int work{i}({params}) {{"]
        tail = ["    return n;", "}"]
        body_b = ["    " + x for x in pre + b + post]
        body_a = ["    " + x for x in pre + a + post]
        pairs.append(("\n".join(head + body_b + tail) + "\n", "\n".join(head + body_a + tail) + "\n"))
    return _pattern_text(fam, before, after), pairs
