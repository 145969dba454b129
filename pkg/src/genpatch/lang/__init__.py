"""MiniC front end: tokens, ASTs, control-flow graphs, printing."""

from .ast import AstUnit, Node, function_name
from .cfg import Cfg, CfgNode, build_cfg
from .lexer import LexError, Position, Token, lex, tokenize
from .parser import ParseError, Parser, parse_unit
from .printer import apply_edits, print_unit, render, render_expr

__all__ = [
    "AstUnit",
    "Cfg",
    "CfgNode",
    "LexError",
    "Node",
    "ParseError",
    "Parser",
    "Position",
    "Token",
    "apply_edits",
    "build_cfg",
    "function_name",
    "lex",
    "parse_unit",
    "print_unit",
    "render",
    "render_expr",
    "tokenize",
]
