"""Lossless tokenizer for the MiniC subset.

Whitespace and comments never become tokens; they are kept as ``trivia`` on
the token that follows them, and whatever trails the last token is returned
separately.  Joining ``trivia + lexeme`` over all tokens and appending the
trailing trivia gives back the input exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    """
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register return short signed sizeof
    static struct switch typedef union unsigned void volatile while _Bool
    """.split()
)

KEYWORD = "keyword"
IDENTIFIER = "identifier"
NUMBER = "number-literal"
STRING = "string-literal"
CHAR = "char-literal"
OPERATOR = "operator"
PUNCTUATION = "punctuation"

_OPERATORS = sorted(
    """
    -> ++ -- <<= >>= << >> <= >= == != && || += -= *= /= %= &= |= ^=
    + - * / % < > = ! & | ^ ~ ? : .
    """.split(),
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<linecomment>//[^\n]*)
  | (?P<blockcomment>/\*.*?\*/)
  | (?P<badcomment>/\*)
  | (?P<dots>\.\.\.)
  | (?P<number>0[xX][0-9a-fA-F]+[uUlL]*|(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[uUlLfF]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>")
  | (?P<char>'(?:[^'\\\n]|\\.)*')
  | (?P<badchar>')
  | (?P<op>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + r""")
  | (?P<punct>[;,(){}\[\]\#@\\$`])
  | (?P<other>.)
    """,
    re.S | re.X,
)


class LexError(ValueError):
    def __init__(self, message: str, position: "Position"):
        super().__init__(f"{position}: {message}")
        self.position = position


@dataclass(frozen=True, slots=True)
class Position:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    lexeme: str
    position: Position
    offset: int
    trivia: str = ""

    @property
    def line(self) -> int:
        return self.position.line

    @property
    def column(self) -> int:
        return self.position.column

    @property
    def end(self) -> int:
        return self.offset + len(self.lexeme)

    def __repr__(self) -> str:
        return f"<{self.kind}:{self.lexeme}@{self.position.line}:{self.position.column}>"


def lex(source: str, path: str = "<string>", lenient: bool = False) -> tuple[list[Token], str]:
    """Tokenize ``source``; return the tokens and the trailing trivia.

    With ``lenient`` set, unterminated strings, chars and comments are
    absorbed (to end of line, or end of file for comments) instead of raising.
    Preprocessor lines are always lexed leniently.
    """
    tokens: list[Token] = []
    trivia: list[str] = []
    line, line_start = 1, 0
    pos = 0
    n = len(source)
    directive_end = -1  # offset where the current preprocessor line stops

    def position_at(offset: int) -> Position:
        return Position(path, line, offset - line_start + 1)

    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        assert m is not None
        group = m.lastgroup
        text = m.group()
        start = pos
        in_directive = start < directive_end
        soft = lenient or in_directive

        if group in ("ws", "linecomment", "blockcomment"):
            trivia.append(text)
        elif group == "badcomment":
            if not soft:
                raise LexError("unterminated comment", position_at(start))
            text = source[start:]
            trivia.append(text)
        else:
            if group in ("badstring", "badchar"):
                if not soft:
                    what = "string" if group == "badstring" else "character"
                    raise LexError(f"unterminated {what} literal", position_at(start))
                eol = source.find("\n", start)
                text = source[start:] if eol < 0 else source[start:eol]
                kind = STRING if group == "badstring" else CHAR
            elif group == "ident":
                kind = KEYWORD if text in KEYWORDS else IDENTIFIER
            elif group == "number":
                kind = NUMBER
            elif group == "string":
                kind = STRING
            elif group == "char":
                kind = CHAR
            elif group == "op":
                kind = OPERATOR
            else:
                kind = PUNCTUATION
            if text == "#" and not in_directive and _starts_line(source, start):
                directive_end = _directive_end(source, start)
            tokens.append(Token(kind, text, position_at(start), start, "".join(trivia)))
            trivia = []

        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = start + text.rindex("\n") + 1
        pos = start + len(text)

    return tokens, "".join(trivia)


def tokenize(source: str, path: str = "<string>") -> list[Token]:
    return lex(source, path)[0]


def _starts_line(source: str, offset: int) -> bool:
    i = offset - 1
    while i >= 0 and source[i] in " \t":
        i -= 1
    return i < 0 or source[i] == "\n"


def _directive_end(source: str, offset: int) -> int:
    i = offset
    while True:
        eol = source.find("\n", i)
        if eol < 0:
            return len(source)
        if source[i:eol].rstrip("\r").endswith("\\"):
            i = eol + 1
            continue
        return eol
