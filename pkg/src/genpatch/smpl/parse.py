"""Parser for generic-patch text.  See docs/generic-patch-grammar.md."""

from __future__ import annotations

import re

from ..lang.ast import Node
from ..lang.lexer import IDENTIFIER, LexError, lex
from ..lang.parser import Parser, ParseError
from .model import (
    METAVAR_KINDS,
    QUANTIFIERS,
    Context,
    Disjunction,
    Dots,
    FunctionHeader,
    GenericPatch,
    GenericPatchRule,
    MetavarDecl,
    Minus,
    Plus,
    Term,
    WhenAny,
    WhenNot,
)


class GenericPatchError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}:{column}: {message}" if line else message)


class PatternSyntaxError(GenericPatchError):
    pass


class UnsupportedConstructError(GenericPatchError):
    pass


class PatternValidationError(GenericPatchError):
    def __init__(self, issues):
        self.issues = list(issues)
        first = self.issues[0]
        super().__init__(first.message, first.line)


_RULE_HEADER = re.compile(r"^@\s*([A-Za-z_]\w*)?\s*([A-Za-z_]\w*)?\s*@\s*$")
_NEST = re.compile(r"<\+?\.\.\.|\.\.\.\+?>")
_POSITION = re.compile(r"@\s*([A-Za-z_]\w*)\s*(;?)\s*$")
_FUNC_HEADER = re.compile(r"^\s*(?P<sig>[^(){};]*\(.*\))\s*\{\s*$")
_CONTROL = re.compile(r"^\s*(if|while|for|else|switch|do|return)\b")


def _is_when(s: str) -> bool:
    return s.startswith("when") and (len(s) == 4 or not (s[4].isalnum() or s[4] == "_"))


def _is_rule_header(line: str) -> bool:
    return _RULE_HEADER.match(line) is not None


def parse_generic_patch(text: str, patch_id: str = "patch") -> GenericPatch:
    """Parse pattern text; raises a ``GenericPatchError`` subclass on bad input."""
    from .validate import validate_rule

    try:
        rules = _Reader(text).rules()
    except GenericPatchError:
        raise
    except (ParseError, LexError) as exc:  # pragma: no cover - defensive
        raise PatternSyntaxError(str(exc)) from exc
    except RecursionError as exc:
        raise PatternSyntaxError("pattern nesting too deep") from exc
    if not rules:
        raise PatternSyntaxError("no rule found", 1)
    for rule, line in rules:
        errors = [i for i in validate_rule(rule) if i.severity == "error"]
        if errors:
            if errors[0].line == 0:
                errors[0] = type(errors[0])(errors[0].severity, errors[0].message, line, errors[0].rule)
            raise PatternValidationError(errors)
    return GenericPatch(patch_id, tuple(r for r, _ in rules))


class _Reader:
    def __init__(self, text: str):
        if "\x00" in text:
            raise PatternSyntaxError("NUL byte in pattern", 1)
        self.lines = text.splitlines()

    def rules(self) -> list[tuple[GenericPatchRule, int]]:
        out = []
        i = 0
        n = len(self.lines)
        while i < n:
            line = self.lines[i]
            if not line.strip() or line.lstrip().startswith("//"):
                i += 1
                continue
            m = _RULE_HEADER.match(line.strip())
            if m is None:
                raise PatternSyntaxError("expected rule header '@name@'", i + 1, 1)
            name, quant = m.group(1) or "", m.group(2)
            if name in QUANTIFIERS and quant is None:
                name, quant = "", name
            if quant is not None and quant not in QUANTIFIERS:
                raise PatternSyntaxError(f"unknown rule annotation {quant!r}", i + 1, 1)
            start = i + 1
            i += 1
            # `@@` alone opens an anonymous rule; its declarations end at the next `@@`
            decls: list[MetavarDecl] = []
            while True:
                if i >= n:
                    raise PatternSyntaxError("missing '@@' after declarations", start, 1)
                s = self.lines[i].strip()
                i += 1
                if s == "@@":
                    break
                if not s or s.startswith("//"):
                    continue
                decls += self._decls(s, i)
            body_start = i
            while i < n and not _is_rule_header(self.lines[i].strip()):
                i += 1
            rule = _BodyReader(self.lines, body_start, i, name, quant or "forall", decls).rule()
            out.append((rule, start))
        return out

    @staticmethod
    def _decls(s: str, lineno: int) -> list[MetavarDecl]:
        out = []
        for part in s.split(";"):
            part = part.strip()
            if not part:
                continue
            m = re.match(r"^([a-z]+)\s+(.*)$", part)
            if m is None:
                raise PatternSyntaxError(f"malformed declaration {part!r}", lineno, 1)
            kind, names = m.group(1), m.group(2)
            if kind not in METAVAR_KINDS:
                raise PatternSyntaxError(f"unknown metavariable kind {kind!r}", lineno, 1)
            for name in names.split(","):
                name = name.strip()
                if not re.fullmatch(r"[A-Za-z_]\w*", name):
                    raise PatternSyntaxError(f"bad metavariable name {name!r}", lineno, 1)
                out.append(MetavarDecl(name, kind))
        if not s.rstrip().endswith(";"):
            raise PatternSyntaxError("declaration must end with ';'", lineno, len(s))
        return out


class _BodyReader:
    def __init__(self, lines, lo, hi, name, quantifier, decls):
        self.lines = lines
        self.lo, self.hi = lo, hi
        self.name = name
        self.quantifier = quantifier
        self.decls = decls
        kinds = {d.name: d.kind for d in decls}
        self.type_names = {k for k, v in kinds.items() if v in ("type", "parameter")}
        self.statement_vars = {k for k, v in kinds.items() if v == "statement"}

    # each entry: (lineno, prefix, content)
    def _entries(self):
        out = []
        for idx in range(self.lo, self.hi):
            raw = self.lines[idx]
            lineno = idx + 1
            if not raw.strip() or raw.lstrip().startswith("//"):
                continue
            if _NEST.search(raw):
                col = _NEST.search(raw).start() + 1
                raise UnsupportedConstructError("nests '<... ...>' are not supported", lineno, col)
            if raw[0] in "+-":
                out.append((lineno, raw[0], " " + raw[1:]))
            else:
                out.append((lineno, " ", raw))
        return out

    def rule(self) -> GenericPatchRule:
        entries = self._entries()
        header = None
        if entries and entries[0][1] == " " and not _CONTROL.match(entries[0][2]):
            m = _FUNC_HEADER.match(entries[0][2])
            if m is not None:
                header = self._header(entries[0])
                last = entries[-1] if len(entries) > 1 else None
                if last is None or last[1] != " " or last[2].strip() != "}":
                    raise PatternSyntaxError("function template is missing its closing '}'", entries[0][0], 1)
                entries = entries[1:-1]
        body = self._elements(entries)
        return GenericPatchRule(self.name, tuple(self.decls), tuple(body), header, self.quantifier)

    def _header(self, entry) -> FunctionHeader:
        lineno, _, content = entry
        sig = _FUNC_HEADER.match(content).group("sig")
        toks = self._lex(lineno, sig)
        p = Parser(toks, pattern=True, type_names=self.type_names)
        try:
            ret = None
            if not (p.peek() is not None and p.peek().kind == IDENTIFIER and p.at("(", k=1)):
                ret_node = p.type_with_pointers()
                ret = Term(ret_node, None, lineno)
            name_tok = p.expect_ident()
            params = p.param_list()
            if not p.at_end():
                raise ParseError("unexpected text after parameter list", p.peek())
        except ParseError as exc:
            raise self._syntax(exc, lineno) from None
        name = Term(Node("Identifier", (), name_tok.lexeme, (name_tok,)), None, lineno)
        return FunctionHeader(name, Term(params, None, lineno), ret)

    def _lex(self, lineno: int, text: str, col_offset: int = 0):
        try:
            toks, _ = lex("\n" * (lineno - 1) + text, "<pattern>")
        except LexError as exc:
            raise PatternSyntaxError(str(exc.args[0]) if exc.args else "lexical error", lineno, 1) from None
        return toks

    @staticmethod
    def _syntax(exc: ParseError, lineno: int) -> PatternSyntaxError:
        tok = exc.token
        if tok is not None:
            return PatternSyntaxError(str(exc).split(": ", 1)[-1], tok.line, tok.column)
        return PatternSyntaxError(str(exc), lineno, 1)

    # -- body ---------------------------------------------------------
    def _elements(self, entries) -> list:
        # stack of (element list, branch list or None, line of '(')
        stack: list[tuple[list, list | None, int]] = [([], None, 0)]
        chunk: list = []
        chunk_prefix = None

        def flush():
            nonlocal chunk, chunk_prefix
            if chunk:
                stack[-1][0].extend(self._chunk(chunk, chunk_prefix))
            chunk, chunk_prefix = [], None

        for lineno, prefix, content in entries:
            s = content.strip()
            if prefix == "+" and _is_when(s):
                raise PatternSyntaxError("'when' clauses cannot be added code", lineno, 1)
            if _is_when(s):
                if prefix != " ":
                    raise PatternSyntaxError("'when' clause cannot carry a '-' marker", lineno, 1)
                elems = stack[-1][0]
                follows_dots = bool(elems) and isinstance(elems[-1], Dots)
                if chunk and chunk_prefix == "+" and follows_dots:
                    raise PatternSyntaxError("added line inside a 'when' clause", chunk[0][0], 1)
                if chunk or not follows_dots:
                    raise PatternSyntaxError("'when' clause must follow '...'", lineno, 1)
                dots = elems[-1]
                elems[-1] = Dots(dots.whens + (self._when(lineno, s[4:]),), dots.line)
                continue
            if s.startswith("..."):
                if prefix != " ":
                    raise PatternSyntaxError("'...' cannot be added or removed", lineno, 1)
                flush()
                rest = s[3:].strip()
                whens: tuple = ()
                if rest:
                    if not rest.startswith("when"):
                        raise PatternSyntaxError("only 'when' may follow '...'", lineno, 4)
                    whens = (self._when(lineno, rest[4:]),)
                stack[-1][0].append(Dots(whens, lineno))
                continue
            if prefix == " " and s in ("(", "|", ")"):
                flush()
                if s == "(":
                    stack.append(([], [], lineno))
                elif s == "|":
                    if stack[-1][1] is None:
                        raise PatternSyntaxError("'|' outside a disjunction", lineno, 1)
                    elems, branches, ln = stack.pop()
                    stack.append(([], branches + [tuple(elems)], ln))
                else:
                    if stack[-1][1] is None:
                        raise PatternSyntaxError("unbalanced ')'", lineno, 1)
                    elems, branches, ln = stack.pop()
                    stack[-1][0].append(Disjunction(tuple(branches + [tuple(elems)]), ln))
                continue
            if chunk and prefix != chunk_prefix:
                flush()
            chunk.append((lineno, content))
            chunk_prefix = prefix
        flush()
        if len(stack) != 1:
            raise PatternSyntaxError("unterminated disjunction", stack[-1][2], 1)
        return stack[0][0]

    def _when(self, lineno: int, rest: str):
        rest = rest.strip()
        if rest == "any":
            return WhenAny()
        if rest.startswith("!="):
            terms = self._chunk([(lineno, " " * 0 + rest[2:])], " ", allow_position=False)
            if len(terms) != 1:
                raise PatternSyntaxError("'when !=' needs exactly one term", lineno, 1)
            return WhenNot(terms[0].term)
        raise UnsupportedConstructError(f"unsupported when clause {rest!r}", lineno, 1)

    def _chunk(self, lines, prefix, allow_position: bool = True) -> list:
        positions: dict[int, str] = {}
        cleaned = []
        for lineno, content in lines:
            if "@" in content:
                m = _POSITION.search(content)
                if m is None or not allow_position or "@" in content[: m.start()]:
                    raise PatternSyntaxError(
                        "position annotation must end its line", lineno, content.index("@") + 1
                    )
                positions[lineno] = m.group(1)
                content = content[: m.start()] + m.group(2)
            cleaned.append((lineno, content))
        first = cleaned[0][0]
        text = "\n".join(c for _, c in cleaned)
        toks = self._lex(first, text)
        if not toks:
            raise PatternSyntaxError("empty term", first, 1)
        nodes = self._parse_terms(toks, first)
        terms = []
        for node in nodes:
            last_line = node.tokens[-1].line
            pos = positions.pop(last_line, None)
            terms.append(Term(node, pos, node.tokens[0].line))
        if positions:
            line = next(iter(positions))
            raise PatternSyntaxError("position annotation is not at the end of a term", line, 1)
        ctor = {" ": Context, "-": Minus, "+": Plus}[prefix]
        return [ctor(t, t.line) for t in terms]

    def _parse_terms(self, toks, lineno: int) -> list[Node]:
        p = Parser(toks, pattern=True, type_names=self.type_names)
        if toks[-1].lexeme not in (";", "}"):
            try:
                expr = p.comma_expression()
                if p.at_end():
                    if expr.type == "Identifier" and expr.label in self.statement_vars:
                        return [Node("ExprStmt", (expr,), None, expr.tokens)]
                    return [expr]
            except ParseError:
                pass
        p = Parser(toks, pattern=True, type_names=self.type_names, lenient_semicolons=True)
        out = []
        try:
            while not p.at_end():
                out.append(p._statement())
        except ParseError as exc:
            raise self._syntax(exc, lineno) from None
        for node in out:
            for sub in node.walk():
                if sub.type == "OpaqueStmt":
                    raise PatternSyntaxError("unsupported statement in pattern", sub.tokens[0].line, sub.tokens[0].column)
        return out
