"""T-PGQL lexer, parser and printer."""
from . import ast
from .lexer import Token, tokenize
from .parser import parse, parse_expression
from .printer import expr_to_text, to_text

__all__ = ["ast", "Token", "tokenize", "parse", "parse_expression", "expr_to_text", "to_text"]
