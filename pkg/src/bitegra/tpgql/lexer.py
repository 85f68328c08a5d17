"""Tokenizer for T-PGQL."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import LexError

KEYWORDS = frozenset("""
    SELECT DISTINCT FROM MATCH ON WHERE GROUP BY HAVING ORDER ASC DESC LIMIT AS
    AND OR NOT IS NULL TRUE FALSE FOR ALL OF BETWEEN TO DATE TIMESTAMP
    CURRENT_TIMESTAMP PERIOD LENGTH OVERLAPS EQUALS CONTAINS PRECEDES SUCCEEDS
    IMMEDIATELY
""".split())

# typographic quotes found in copied listings
_QUOTES = str.maketrans({"‘": "'", "’": "'", "‚": "'", "′": "'",
                         "“": '"', "”": '"'})

_PUNCT2 = ("<>", "<=", ">=", "!=", "->")
_PUNCT1 = "()[],.:|=<>+-*/%;"


@dataclass(frozen=True)
class Token:
    kind: str  # KW, IDENT, STRING, INT, FLOAT, PUNCT, EOF
    value: object
    pos: int

    def is_kw(self, *words: str) -> bool:
        return self.kind == "KW" and self.value in words

    def is_punct(self, *syms: str) -> bool:
        return self.kind == "PUNCT" and self.value in syms

    def __repr__(self) -> str:
        return f"{self.kind}({self.value})"


def normalize(text: str) -> str:
    return text.translate(_QUOTES)


def tokenize(text: str) -> list[Token]:
    text = normalize(text)
    out: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise LexError("unterminated comment", i)
            i = j + 2
            continue
        if c == "'":
            buf, j = [], i + 1
            while True:
                if j >= n:
                    raise LexError("unterminated string literal", i)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            out.append(Token("STRING", "".join(buf), i))
            i = j + 1
            continue
        if c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise LexError("unterminated quoted identifier", i)
            out.append(Token("IDENT", text[i + 1:j], i))
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j + 1 < n and text[j] == "." and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                out.append(Token("FLOAT", float(text[i:j]), i))
            else:
                out.append(Token("INT", int(text[i:j]), i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            up = word.upper()
            if up in KEYWORDS:
                out.append(Token("KW", up, i))
            else:
                out.append(Token("IDENT", word, i))
            i = j
            continue
        two = text[i:i + 2]
        if two in _PUNCT2:
            out.append(Token("PUNCT", "<>" if two == "!=" else two, i))
            i += 2
            continue
        if c in _PUNCT1:
            out.append(Token("PUNCT", c, i))
            i += 1
            continue
        raise LexError(f"unexpected character {c!r}", i)
    out.append(Token("EOF", None, n))
    return out
