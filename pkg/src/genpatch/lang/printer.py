"""Lossless unit printing and structural pretty-printing of AST nodes.

``print_unit`` reproduces the parsed file byte for byte.  ``render`` works
from node structure alone (no tokens needed), which is what instantiated
templates and inferred patterns require.
"""

from __future__ import annotations

from .ast import DOTS, AstUnit, Node
from .parser import BINARY_PRECEDENCE

INDENT = "    "


def print_unit(unit: AstUnit) -> str:
    return "".join(t.trivia + t.lexeme for t in unit.tokens) + unit.trailing


def apply_edits(source: str, edits) -> str:
    """Apply ``(start, end, text)`` replacements given in source offsets."""
    out = []
    cursor = 0
    for start, end, text in sorted(edits, key=lambda e: (e[0], e[1])):
        if start < cursor:
            raise ValueError(f"overlapping edits at offset {start}")
        out.append(source[cursor:start])
        out.append(text)
        cursor = end
    out.append(source[cursor:])
    return "".join(out)


# precedence levels used only for parenthesization
_COMMA, _ASSIGN, _COND = 0, 1, 2
_UNARY, _POSTFIX, _PRIMARY = 13, 14, 15


def _prec(node: Node) -> int:
    t = node.type
    if t == "BinaryExpr":
        if node.label == ",":
            return _COMMA
        if node.label == "?:":
            return _COND
        return 2 + BINARY_PRECEDENCE[node.label]
    if t == "AssignExpr":
        return _ASSIGN
    if t == "UnaryExpr":
        return _POSTFIX if node.label.startswith("post") else _UNARY
    if t in ("CallExpr", "IndexExpr", "FieldAccess"):
        return _POSTFIX
    return _PRIMARY


def needs_parens(child: Node, parent: Node | None, index: int) -> bool:
    """Whether ``child`` placed as ``parent.children[index]`` must be parenthesized."""
    if parent is None or not (parent.is_expression or parent.type == DOTS):
        return False
    t, op = parent.type, parent.label
    if t == "BinaryExpr":
        if op == ",":
            low = _COMMA if index == 0 else _ASSIGN
        elif op == "?:":
            low = (_COND + 1, 0, _COND)[index]
        else:
            low = _prec(parent) + (1 if index else 0)
    elif t == "AssignExpr":
        low = _UNARY if index == 0 else _ASSIGN
    elif t == "UnaryExpr":
        if op == "sizeof":
            low = 0
        elif op.startswith("post"):
            low = _POSTFIX
        else:
            low = _UNARY
    elif t == "CallExpr":
        low = _POSTFIX if index == 0 else _ASSIGN
    elif t in ("IndexExpr", "FieldAccess"):
        low = _POSTFIX if index == 0 else 0
    else:
        low = 0
    return _prec(child) < low


def _wrap(node: Node, minimum: int) -> str:
    text = render_expr(node)
    return f"({text})" if _prec(node) < minimum else text


def render_type(node: Node) -> str:
    if node.type == "PointerType":
        inner = render_type(node.children[0])
        sep = "" if inner.endswith("*") else " "
        return f"{inner}{sep}{node.label}"
    return node.label


def _join_type(ty: str, name: str) -> str:
    if not name:
        return ty
    return f"{ty}{name}" if ty.endswith("*") else f"{ty} {name}"


def render_expr(node: Node) -> str:
    t = node.type
    c = node.children
    if t in ("Identifier", "Literal"):
        return node.label
    if t == DOTS:
        return "..."
    if t in ("TypeName", "PointerType"):
        return render_type(node)
    if t == "BinaryExpr":
        op = node.label
        if op == ",":
            return f"{_wrap(c[0], _COMMA)}, {_wrap(c[1], _ASSIGN)}"
        if op == "?:":
            return f"{_wrap(c[0], _COND + 1)} ? {render_expr(c[1])} : {_wrap(c[2], _COND)}"
        p = _prec(node)
        return f"{_wrap(c[0], p)} {op} {_wrap(c[1], p + 1)}"
    if t == "AssignExpr":
        return f"{_wrap(c[0], _UNARY)} {node.label} {_wrap(c[1], _ASSIGN)}"
    if t == "UnaryExpr":
        op = node.label
        if op.startswith("post"):
            return f"{_wrap(c[0], _POSTFIX)}{op[4:]}"
        if op == "cast":
            return f"({render_type(c[0])}){_wrap(c[1], _UNARY)}"
        if op == "sizeof":
            inner = c[0]
            body = render_type(inner) if inner.type in ("TypeName", "PointerType") else render_expr(inner)
            return f"sizeof({body})"
        return f"{op}{_wrap(c[0], _UNARY)}"
    if t == "CallExpr":
        args = ", ".join(_wrap(a, _ASSIGN) for a in c[1:])
        return f"{_wrap(c[0], _POSTFIX)}({args})"
    if t == "IndexExpr":
        idx = render_expr(c[1]) if len(c) > 1 else ""
        return f"{_wrap(c[0], _POSTFIX)}[{idx}]"
    if t == "FieldAccess":
        return f"{_wrap(c[0], _POSTFIX)}{node.label}{c[1].label}"
    if t == "Param":
        return render_param(node)
    if node.tokens:
        return node.text()
    raise ValueError(f"cannot render {t} as an expression")


def render_param(node: Node) -> str:
    if node.label == "...":
        return "..."
    ty = render_type(node.children[0])
    name = render_declarator(node.children[1]) if len(node.children) > 1 else ""
    return _join_type(ty, name)


def render_declarator(node: Node) -> str:
    if node.type == "PointerType":
        return node.label + render_declarator(node.children[0])
    if node.type == "IndexExpr":
        size = render_expr(node.children[1]) if len(node.children) > 1 else ""
        return f"{render_declarator(node.children[0])}[{size}]"
    if node.type == "AssignExpr":
        return f"{render_declarator(node.children[0])} = {_wrap(node.children[1], _ASSIGN)}"
    return render_expr(node)


def _block(body: Node, indent: str) -> tuple[list[str], bool]:
    """Lines of a branch body; flag says whether it was a braced block."""
    if body.type == "CompoundStmt":
        lines = []
        for s in body.children:
            lines += render_stmt(s, indent + INDENT)
        return lines, True
    return render_stmt(body, indent + INDENT), False


def _with_body(head: str, body: Node, indent: str) -> list[str]:
    lines, braced = _block(body, indent)
    if braced:
        return [f"{indent}{head} {{", *lines, f"{indent}}}"]
    return [f"{indent}{head}", *lines]


def render_stmt(node: Node, indent: str = "") -> list[str]:
    t = node.type
    c = node.children
    if t == "ExprStmt":
        if not c:
            return [indent + ";"]
        if node.label == "metavar":
            return [indent + render_expr(c[0])]
        return [f"{indent}{render_expr(c[0])};"]
    if t == "DeclStmt":
        decls = ", ".join(render_declarator(d) for d in c[1:])
        return [f"{indent}{_join_type(render_type(c[0]), decls)};"]
    if t == "ReturnStmt":
        return [f"{indent}return {render_expr(c[0])};" if c else f"{indent}return;"]
    if t == "BreakStmt":
        return [indent + "break;"]
    if t == "ContinueStmt":
        return [indent + "continue;"]
    if t == "CompoundStmt":
        lines = [indent + "{"]
        for s in c:
            lines += render_stmt(s, indent + INDENT)
        return lines + [indent + "}"]
    if t == "IfStmt":
        lines = _with_body(f"if ({render_expr(c[0])})", c[1], indent)
        if len(c) > 2:
            els = c[2]
            if lines[-1] == indent + "}":
                lines[-1] = indent + "} else"
            else:
                lines.append(indent + "else")
            if els.type == "CompoundStmt":
                inner, _ = _block(els, indent)
                lines[-1] += " {"
                lines += inner + [indent + "}"]
            elif els.type == "IfStmt":
                nested = render_stmt(els, indent)
                lines[-1] += " " + nested[0].lstrip()
                lines += nested[1:]
            else:
                lines += render_stmt(els, indent + INDENT)
        return lines
    if t == "WhileStmt":
        return _with_body(f"while ({render_expr(c[0])})", c[1], indent)
    if t == "ForStmt":
        parts = list(c[:-1])
        flags = node.label or ""
        init = cond = step = ""
        if "i" in flags:
            p = parts.pop(0)
            init = render_stmt(p)[0][:-1] if p.type == "DeclStmt" else render_expr(p)
        if "c" in flags:
            cond = render_expr(parts.pop(0))
        if "s" in flags:
            step = render_expr(parts.pop(0))
        cond = f" {cond}" if cond else ""
        step = f" {step}" if step else ""
        head = f"for ({init};{cond};{step})"
        return _with_body(head, c[-1], indent)
    if t == "OpaqueStmt":
        return [indent + node.text()]
    return [indent + render_expr(node)]


def render(node: Node, indent: str = "") -> str:
    if node.is_statement:
        return "\n".join(render_stmt(node, indent))
    return render_expr(node)
