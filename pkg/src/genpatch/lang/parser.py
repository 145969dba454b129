"""Recursive-descent parser for MiniC with opaque-region recovery.

Anything outside the supported grammar (preprocessor lines, struct bodies,
switch, do/while, labels, initializer lists, ...) is kept as an
``OpaqueStmt`` holding its raw tokens, so parsing never fails on real code.

The same parser reads pattern templates; ``pattern=True`` enables `...` as a
wildcard in argument and parameter lists and ``lenient_semicolons`` accepts a
missing `;` at the end of a line.
"""

from __future__ import annotations

from .ast import DOTS, AstUnit, Node
from .lexer import IDENTIFIER, KEYWORD, NUMBER, STRING, CHAR, Token, lex


class ParseError(Exception):
    def __init__(self, message: str, token: Token | None = None):
        where = f"{token.position}: " if token is not None else ""
        super().__init__(where + message)
        self.token = token


BINARY_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6,
    "!=": 6,
    "<": 7,
    ">": 7,
    "<=": 7,
    ">=": 7,
    "<<": 8,
    ">>": 8,
    "+": 9,
    "-": 9,
    "*": 10,
    "/": 10,
    "%": 10,
}
ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>=".split())
PREFIX_OPS = frozenset("- + ! ~ * & ++ --".split())

TYPE_QUALIFIERS = frozenset("const volatile static extern register inline auto".split())
BASE_TYPE_WORDS = frozenset("void char short int long float double signed unsigned _Bool".split())
TAG_WORDS = frozenset(("struct", "union", "enum"))
TYPE_START_WORDS = TYPE_QUALIFIERS | BASE_TYPE_WORDS | TAG_WORDS

_OPAQUE_KEYWORDS = frozenset(("do", "switch", "goto", "case", "default", "typedef"))


class Parser:
    def __init__(
        self,
        tokens: list[Token],
        *,
        pattern: bool = False,
        type_names=(),
        lenient_semicolons: bool = False,
    ):
        self.toks = tokens
        self.i = 0
        self.pattern = pattern
        self.type_names = frozenset(type_names)
        self.lenient = lenient_semicolons

    # -- token helpers -------------------------------------------------
    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, *lexemes: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.lexeme in lexemes and t.kind not in (STRING, CHAR)

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def advance(self) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.toks[-1] if self.toks else None)
        self.i += 1
        return t

    def expect(self, lexeme: str) -> Token:
        t = self.peek()
        if t is None or t.lexeme != lexeme:
            raise ParseError(f"expected {lexeme!r}, found {t.lexeme if t else 'end of input'!r}", t)
        self.i += 1
        return t

    def expect_ident(self) -> Token:
        t = self.peek()
        if t is None or t.kind != IDENTIFIER:
            raise ParseError("expected identifier", t)
        self.i += 1
        return t

    def expect_semicolon(self) -> None:
        if self.at(";"):
            self.i += 1
            return
        if self.lenient and self.i > 0:
            t = self.peek()
            if t is None or t.line > self.toks[self.i - 1].line:
                return
        raise ParseError("expected ';'", self.peek())

    def mk(self, type: str, children, start: int, label: str | None = None) -> Node:
        return Node(type, children, label, self.toks[start : self.i])

    # -- top level -----------------------------------------------------
    def translation_unit(self) -> Node:
        items = []
        while not self.at_end():
            items.append(self.external_item())
        return Node("TranslationUnit", items, None, self.toks)

    def external_item(self) -> Node:
        start = self.i
        if self._at_directive():
            return self.directive()
        for attempt in (self.function_def, self.declaration):
            try:
                return attempt()
            except ParseError:
                self.i = start
        return self.recover(top_level=True)

    def _at_directive(self) -> bool:
        t = self.peek()
        if t is None or t.lexeme != "#":
            return False
        return self.i == 0 or "\n" in t.trivia or self.toks[self.i - 1].line < t.line

    def directive(self) -> Node:
        start = self.i
        line = self.advance().line
        while not self.at_end():
            t = self.peek()
            prev = self.toks[self.i - 1]
            if t.line == line or (prev.lexeme == "\\" and t.line == prev.line + 1):
                self.i += 1
                line = t.line
            else:
                break
        return self.mk("OpaqueStmt", (), start)

    def recover(self, top_level: bool = False) -> Node:
        """Swallow one unparseable region into an OpaqueStmt."""
        start = self.i
        depth = 0
        while not self.at_end():
            t = self.peek()
            if self.i > start and self._at_directive():
                break
            lx = t.lexeme if t.kind not in (STRING, CHAR) else ""
            if lx == "}" and depth == 0:
                if self.i == start:
                    self.i += 1
                break
            self.i += 1
            if lx in ("(", "[", "{"):
                depth += 1
            elif lx in (")", "]", "}"):
                depth -= 1
                if lx == "}" and depth == 0:
                    nxt = self.peek()
                    follow = ("while", ";", "else") + (("=", ",") if top_level else ())
                    if nxt is not None and (
                        nxt.lexeme in follow or (top_level and nxt.kind == IDENTIFIER)
                    ):
                        continue
                    break
            elif lx == ";" and depth == 0:
                break
        return self.mk("OpaqueStmt", (), start)

    def function_def(self) -> Node:
        start = self.i
        ret = self.type_with_pointers()
        name_tok = self.expect_ident()
        name = Node("Identifier", (), name_tok.lexeme, (name_tok,))
        params = self.param_list()
        if not self.at("{"):
            raise ParseError("expected function body", self.peek())
        body = self.compound()
        return self.mk("FunctionDef", (ret, name, params, body), start)

    def param_list(self) -> Node:
        start = self.i
        self.expect("(")
        params = []
        if self.at("void") and self.at(")", k=1):
            pstart = self.i
            self.advance()
            params.append(self.mk("Param", (self.mk("TypeName", (), pstart, "void"),), pstart))
        elif not self.at(")"):
            while True:
                params.append(self.param())
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        return self.mk("ParamList", params, start)

    def param(self) -> Node:
        start = self.i
        if self.pattern and self.at(".") and self.at(".", k=1):
            # `..` typo for `...`, seen in hand-written patterns
            self.advance()
            self.advance()
            return self.mk(DOTS, (), start)
        if self.at("..."):
            self.advance()
            if self.pattern:
                return self.mk(DOTS, (), start)
            return self.mk("Param", (), start, "...")
        ty = self.type_with_pointers()
        children = [ty]
        t = self.peek()
        if t is not None and t.kind == IDENTIFIER:
            nstart = self.i
            self.advance()
            decl = Node("Identifier", (), t.lexeme, (t,))
            while self.at("["):
                self.advance()
                dims = [decl]
                if not self.at("]"):
                    dims.append(self.assignment())
                self.expect("]")
                decl = self.mk("IndexExpr", dims, nstart)
            children.append(decl)
        return self.mk("Param", children, start)

    # -- types ---------------------------------------------------------
    def is_type_start(self, k: int = 0) -> bool:
        t = self.peek(k)
        if t is None:
            return False
        if t.kind == KEYWORD and t.lexeme in TYPE_START_WORDS:
            return True
        return t.kind == IDENTIFIER and t.lexeme in self.type_names

    def type_spec(self) -> Node:
        start = self.i
        words: list[str] = []
        has_base = False
        while True:
            t = self.peek()
            if t is None:
                break
            if t.kind == KEYWORD and t.lexeme in TYPE_QUALIFIERS:
                words.append(self.advance().lexeme)
            elif t.kind == KEYWORD and t.lexeme in BASE_TYPE_WORDS:
                words.append(self.advance().lexeme)
                has_base = True
            elif t.kind == KEYWORD and t.lexeme in TAG_WORDS and not has_base:
                self.advance()
                tag = self.expect_ident()
                if self.at("{"):
                    raise ParseError("tagged type bodies are not supported", self.peek())
                words += [t.lexeme, tag.lexeme]
                has_base = True
            elif t.kind == IDENTIFIER and not has_base and self._typedef_name_here():
                words.append(self.advance().lexeme)
                has_base = True
            else:
                break
        if not has_base:
            raise ParseError("expected a type", self.peek())
        return self.mk("TypeName", (), start, " ".join(words))

    def _typedef_name_here(self) -> bool:
        t = self.peek()
        if t.lexeme in self.type_names:
            return True
        nxt = self.peek(1)
        if nxt is None:
            return False
        if nxt.kind == IDENTIFIER:
            return True
        if nxt.lexeme == "*":
            k = 1
            while self.at("*", k=k) or self.at("const", k=k):
                k += 1
            after = self.peek(k)
            follow = self.peek(k + 1)
            return (
                after is not None
                and after.kind == IDENTIFIER
                and (follow is None or follow.lexeme in ("=", ";", ",", "[", ")", "("))
            )
        return False

    def type_with_pointers(self) -> Node:
        start = self.i
        ty = self.type_spec()
        while self.at("*"):
            self.advance()
            label = "*"
            while self.at("const", "volatile"):
                label += " " + self.advance().lexeme
            ty = self.mk("PointerType", (ty,), start, label)
        return ty

    # -- declarations ----------------------------------------------------
    def looks_like_declaration(self) -> bool:
        t = self.peek()
        if t is None:
            return False
        if self.is_type_start():
            return True
        if t.kind == IDENTIFIER:
            saved = self.i
            try:
                return self._typedef_name_here()
            finally:
                self.i = saved
        return False

    def declaration(self) -> Node:
        start = self.i
        base = self.type_spec()
        items = []
        while True:
            dstart = self.i
            decl = self.declarator()
            if self.at("="):
                self.advance()
                if self.at("{"):
                    raise ParseError("initializer lists are not supported", self.peek())
                init = self.assignment()
                decl = self.mk("AssignExpr", (decl, init), dstart, "=")
            items.append(decl)
            if self.at(","):
                self.advance()
                continue
            break
        self.expect_semicolon()
        return self.mk("DeclStmt", (base, *items), start)

    def declarator(self) -> Node:
        start = self.i
        if self.at("*"):
            self.advance()
            label = "*"
            while self.at("const", "volatile"):
                label += " " + self.advance().lexeme
            inner = self.declarator()
            return self.mk("PointerType", (inner,), start, label)
        t = self.expect_ident()
        node = Node("Identifier", (), t.lexeme, (t,))
        while self.at("["):
            self.advance()
            dims = [node]
            if not self.at("]"):
                dims.append(self.assignment())
            self.expect("]")
            node = self.mk("IndexExpr", dims, start)
        if self.at("("):
            raise ParseError("function declarators are not supported", self.peek())
        return node

    # -- statements ------------------------------------------------------
    def statement(self) -> Node:
        start = self.i
        try:
            return self._statement()
        except ParseError:
            self.i = start
            return self.recover()

    def _statement(self) -> Node:
        t = self.peek()
        if t is None:
            raise ParseError("expected statement")
        lx = t.lexeme
        start = self.i
        if t.kind == KEYWORD:
            if lx == "if":
                self.advance()
                self.expect("(")
                cond = self.comma_expression()
                self.expect(")")
                then = self.statement()
                children = [cond, then]
                if self.at("else"):
                    self.advance()
                    children.append(self.statement())
                return self.mk("IfStmt", children, start)
            if lx == "while":
                self.advance()
                self.expect("(")
                cond = self.comma_expression()
                self.expect(")")
                body = self.statement()
                return self.mk("WhileStmt", (cond, body), start)
            if lx == "for":
                return self.for_statement()
            if lx == "return":
                self.advance()
                children = []
                if not self.at(";") and not self._line_ends_here():
                    children.append(self.comma_expression())
                self.expect_semicolon()
                return self.mk("ReturnStmt", children, start)
            if lx in ("break", "continue"):
                self.advance()
                self.expect_semicolon()
                return self.mk("BreakStmt" if lx == "break" else "ContinueStmt", (), start)
            if lx in _OPAQUE_KEYWORDS:
                raise ParseError(f"unsupported statement {lx!r}", t)
        if lx == "{" and t.kind != STRING:
            return self.compound()
        if lx == ";":
            self.advance()
            return self.mk("ExprStmt", (), start)
        if t.kind == IDENTIFIER and self.at(":", k=1):
            raise ParseError("labels are not supported", t)
        if self.looks_like_declaration():
            try:
                return self.declaration()
            except ParseError:
                self.i = start
        expr = self.comma_expression()
        self.expect_semicolon()
        return self.mk("ExprStmt", (expr,), start)

    def _line_ends_here(self) -> bool:
        if not self.lenient:
            return False
        t = self.peek()
        return t is None or t.line > self.toks[self.i - 1].line

    def for_statement(self) -> Node:
        start = self.i
        self.expect("for")
        self.expect("(")
        parts = []
        flags = ""
        if self.at(";"):
            self.advance()
        elif self.looks_like_declaration():
            parts.append(self.declaration())
            flags += "i"
        else:
            parts.append(self.comma_expression())
            self.expect(";")
            flags += "i"
        if not self.at(";"):
            parts.append(self.comma_expression())
            flags += "c"
        self.expect(";")
        if not self.at(")"):
            parts.append(self.comma_expression())
            flags += "s"
        self.expect(")")
        parts.append(self.statement())
        return self.mk("ForStmt", parts, start, flags)

    def compound(self) -> Node:
        start = self.i
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.at_end():
                raise ParseError("unterminated block", self.toks[start])
            stmts.append(self.statement())
        self.expect("}")
        return self.mk("CompoundStmt", stmts, start)

    def statements_until_end(self) -> list[Node]:
        out = []
        while not self.at_end():
            out.append(self._statement())
        return out

    # -- expressions -----------------------------------------------------
    def comma_expression(self) -> Node:
        start = self.i
        left = self.assignment()
        while self.at(","):
            self.advance()
            right = self.assignment()
            left = self.mk("BinaryExpr", (left, right), start, ",")
        return left

    def expression(self) -> Node:
        return self.comma_expression()

    def assignment(self) -> Node:
        start = self.i
        left = self.conditional()
        t = self.peek()
        if t is not None and t.lexeme in ASSIGN_OPS and t.kind == "operator":
            self.advance()
            right = self.assignment()
            return self.mk("AssignExpr", (left, right), start, t.lexeme)
        return left

    def conditional(self) -> Node:
        start = self.i
        cond = self.binary(1)
        if self.at("?"):
            self.advance()
            a = self.comma_expression()
            self.expect(":")
            b = self.conditional()
            return self.mk("BinaryExpr", (cond, a, b), start, "?:")
        return cond

    def binary(self, min_prec: int) -> Node:
        start = self.i
        left = self.unary()
        while True:
            t = self.peek()
            if t is None or t.kind != "operator":
                return left
            prec = BINARY_PRECEDENCE.get(t.lexeme)
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.binary(prec + 1)
            left = self.mk("BinaryExpr", (left, right), start, t.lexeme)

    def unary(self) -> Node:
        start = self.i
        t = self.peek()
        if t is None:
            raise ParseError("expected expression", self.toks[-1] if self.toks else None)
        if t.kind == "operator" and t.lexeme in PREFIX_OPS:
            self.advance()
            operand = self.unary()
            return self.mk("UnaryExpr", (operand,), start, t.lexeme)
        if t.lexeme == "sizeof" and t.kind == KEYWORD:
            self.advance()
            if self.at("(") and self.is_type_start(1):
                self.advance()
                ty = self.type_with_pointers()
                self.expect(")")
                return self.mk("UnaryExpr", (ty,), start, "sizeof")
            operand = self.unary()
            return self.mk("UnaryExpr", (operand,), start, "sizeof")
        if t.lexeme == "(" and self.is_type_start(1):
            self.advance()
            ty = self.type_with_pointers()
            self.expect(")")
            operand = self.unary()
            return self.mk("UnaryExpr", (ty, operand), start, "cast")
        return self.postfix()

    def postfix(self) -> Node:
        start = self.i
        node = self.primary()
        while True:
            t = self.peek()
            if t is None:
                return node
            lx = t.lexeme
            if t.kind in (STRING, CHAR):
                return node
            if lx == "(":
                self.advance()
                args = [node]
                if not self.at(")"):
                    while True:
                        args.append(self.argument())
                        if self.at(","):
                            self.advance()
                            continue
                        break
                self.expect(")")
                node = self.mk("CallExpr", args, start)
            elif lx == "[":
                self.advance()
                idx = self.comma_expression()
                self.expect("]")
                node = self.mk("IndexExpr", (node, idx), start)
            elif lx in ("->", "."):
                self.advance()
                f = self.expect_ident()
                field = Node("Identifier", (), f.lexeme, (f,))
                node = self.mk("FieldAccess", (node, field), start, lx)
            elif lx in ("++", "--"):
                self.advance()
                node = self.mk("UnaryExpr", (node,), start, "post" + lx)
            else:
                return node

    def argument(self) -> Node:
        if self.pattern and self.at("..."):
            start = self.i
            self.advance()
            return self.mk(DOTS, (), start)
        return self.assignment()

    def primary(self) -> Node:
        start = self.i
        t = self.advance()
        if t.kind == IDENTIFIER:
            return self.mk("Identifier", (), start, t.lexeme)
        if t.kind in (NUMBER, CHAR):
            return self.mk("Literal", (), start, t.lexeme)
        if t.kind == STRING:
            parts = [t.lexeme]
            while self.peek() is not None and self.peek().kind == STRING:
                parts.append(self.advance().lexeme)
            return self.mk("Literal", (), start, " ".join(parts))
        if t.lexeme == "(":
            inner = self.comma_expression()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected token {t.lexeme!r}", t)


def parse_unit(source: str, path: str = "<string>") -> AstUnit:
    """Parse a whole file; unparseable regions become OpaqueStmt nodes."""
    tokens, trailing = lex(source, path, lenient=True)
    root = Parser(tokens).translation_unit()
    degenerate = bool(root.children) and all(c.type == "OpaqueStmt" for c in root.children)
    return AstUnit(path, source, root, tuple(tokens), trailing, degenerate)
