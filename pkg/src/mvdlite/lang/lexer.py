"""Tokenizer for MVDLite text.

The token set is documented in docs/grammar.md.  Comments are kept as trivia
tokens because tag metadata lives inside them.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import LexError

ARROW, COLON, SEMI, PIPE = "ARROW", "COLON", "SEMI", "PIPE"
LPAREN, RPAREN, LBRACKET, RBRACKET, LBRACE, RBRACE = (
    "LPAREN", "RPAREN", "LBRACKET", "RBRACKET", "LBRACE", "RBRACE")
EQ, NE, GT, GE, LT, LE = "EQ", "NE", "GT", "GE", "LT", "LE"
IDENT, STRING, NUMBER, ENUM, COMMENT, EOF = (
    "IDENT", "STRING", "NUMBER", "ENUM", "COMMENT", "EOF")

COMPARATOR_TOKENS = {EQ: "=", NE: "!=", GT: ">", GE: ">=", LT: "<", LE: "<="}

_SPEC = [
    ("WS", r"[ \t\r\n\f]+"),
    (COMMENT, r"//[^\n]*|/\*[\s\S]*?\*/"),
    ("BADCOMMENT", r"/\*"),
    (ARROW, r"->"),
    (NUMBER, r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"),
    (ENUM, r"\.[A-Za-z_][A-Za-z0-9_]*\."),
    (STRING, r"'(?:[^']|'')*'"),
    ("BADSTRING", r"'"),
    (GE, r">="),
    (LE, r"<="),
    (NE, r"!="),
    (EQ, r"="),
    (GT, r">"),
    (LT, r"<"),
    (COLON, r":"),
    (SEMI, r";"),
    (PIPE, r"\|"),
    (LPAREN, r"\("),
    (RPAREN, r"\)"),
    (LBRACKET, r"\["),
    (RBRACKET, r"\]"),
    (LBRACE, r"\{"),
    (RBRACE, r"\}"),
    (IDENT, r"[^\W\d]\w*"),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{pat})" for name, pat in _SPEC))


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    column: int
    offset: int

    def __repr__(self):
        if self.kind in (IDENT, STRING, NUMBER, ENUM):
            return f"{self.kind}({self.value})"
        return self.kind


def _number(text: str):
    if re.fullmatch(r"[+-]?\d+", text):
        return int(text)
    return float(text)


def tokenize(text: str, source: str | None = None) -> list[Token]:
    """Split ruleset text into tokens (comments included), ending with EOF."""
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _MASTER.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise LexError(f"illegal character {text[pos]!r}", line, col, pos, source)
        kind = m.lastgroup
        raw = m.group()
        if kind == "BADSTRING":
            raise LexError("unterminated string literal", line, col, pos, source)
        if kind == "BADCOMMENT":
            raise LexError("unterminated block comment", line, col, pos, source)
        if kind != "WS":
            if kind == STRING:
                value = raw[1:-1].replace("''", "'")
            elif kind == NUMBER:
                value = _number(raw)
            elif kind == ENUM:
                value = raw[1:-1]
            elif kind == COMMENT:
                value = raw[2:-2] if raw.startswith("/*") else raw[2:]
            else:
                value = raw
            tokens.append(Token(kind, value, line, col, pos))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = pos + raw.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token(EOF, None, line, pos - line_start + 1, pos))
    return tokens
