"""TemplateRule statements: ``RuleID[Metric] op value`` combined with AND/OR/XOR/NOT."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import LexError, MvdXmlError
from ..lang import ast as A
from ..lang import lexer as L
from ..lang.printer import format_literal

KEYWORDS = {"AND", "OR", "XOR", "NOT"}


@dataclass(frozen=True)
class Leaf:
    rule_id: str
    kind: str          # one of the five metric kinds
    op: str
    value: object      # lang.ast literal


@dataclass(frozen=True)
class SNot:
    operand: object


@dataclass(frozen=True)
class SAnd:
    items: tuple


@dataclass(frozen=True)
class SOr:
    items: tuple


@dataclass(frozen=True)
class SXor:
    items: tuple


Statement = object
_PREC = {SOr: 1, SXor: 2, SAnd: 3, SNot: 4, Leaf: 5}


def s_and(*items):
    flat = []
    for i in items:
        flat.extend(i.items if isinstance(i, SAnd) else (i,))
    return flat[0] if len(flat) == 1 else SAnd(tuple(flat))


def s_or(*items):
    flat = []
    for i in items:
        flat.extend(i.items if isinstance(i, SOr) else (i,))
    return flat[0] if len(flat) == 1 else SOr(tuple(flat))


def leaves(stmt) -> list:
    if isinstance(stmt, Leaf):
        return [stmt]
    if isinstance(stmt, SNot):
        return leaves(stmt.operand)
    return [x for i in stmt.items for x in leaves(i)]


# -- parsing ---------------------------------------------------------------------

class _P:
    def __init__(self, text: str):
        try:
            self.toks = [t for t in L.tokenize(text) if t.kind != L.COMMENT]
        except LexError as exc:
            raise MvdXmlError(f"statement {text!r}: {exc}") from None
        self.i = 0
        self.text = text

    def peek(self):
        # the trailing EOF token absorbs reads past the end
        return self.toks[min(self.i, len(self.toks) - 1)]

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def fail(self, msg):
        t = self.peek()
        raise MvdXmlError(f"statement {self.text!r}, column {t.column}: {msg}")

    def word(self, w):
        t = self.peek()
        return t.kind == L.IDENT and t.value.upper() == w

    def expr(self, level=1):
        if level == 4:
            if self.word("NOT"):
                self.next()
                return SNot(self.expr(4))
            return self.atom()
        word = {1: "OR", 2: "XOR", 3: "AND"}[level]
        items = [self.expr(level + 1)]
        while self.word(word):
            self.next()
            items.append(self.expr(level + 1))
        if len(items) == 1:
            return items[0]
        return {1: SOr, 2: SXor, 3: SAnd}[level](tuple(items))

    def atom(self):
        t = self.peek()
        if t.kind == L.LPAREN:
            self.next()
            e = self.expr()
            if self.next().kind != L.RPAREN:
                self.fail("expected ')'")
            return e
        if t.kind != L.IDENT or t.value.upper() in KEYWORDS:
            self.fail("expected a RuleID")
        rid = self.next().value
        kind = "Value"
        if self.peek().kind == L.LBRACKET:
            self.next()
            k = self.next()
            if k.kind != L.IDENT:
                self.fail("expected a metric name")
            kind = k.value.capitalize()
            if kind not in A.METRIC_KINDS:
                self.fail(f"unknown metric [{k.value}]")
            if self.next().kind != L.RBRACKET:
                self.fail("expected ']'")
        c = self.next()
        if c.kind not in L.COMPARATOR_TOKENS:
            self.i -= 1
            self.fail("expected a comparator")
        return Leaf(rid, kind, L.COMPARATOR_TOKENS[c.kind], self.value(kind))

    def value(self, kind):
        t = self.next()
        if t.kind == L.STRING:
            return A.TypeName(t.value) if kind == "Type" else A.String(t.value)
        if t.kind == L.NUMBER:
            return A.Number(t.value)
        if t.kind == L.ENUM:
            return A.Enum(t.value.upper())
        if t.kind == L.IDENT:
            up = t.value.upper()
            if up in ("TRUE", "FALSE"):
                return A.Bool(up == "TRUE")
            if kind == "Type":
                return A.TypeName(t.value)
            self.i -= 1
            self.fail(f"identifier {t.value} is not a value (references between RuleIDs are unsupported)")
        self.i -= 1
        self.fail("expected a value")


def parse_statement(text: str) -> Statement:
    """Parse TemplateRule ``Parameters`` text."""
    p = _P(text)
    if p.peek().kind == L.EOF:
        raise MvdXmlError("empty statement")
    e = p.expr()
    if p.peek().kind != L.EOF:
        p.fail("unexpected trailing input")
    return e


# -- printing ----------------------------------------------------------------------

def _value_text(kind: str, v) -> str:
    if isinstance(v, A.TypeName):
        return "'" + v.name + "'"
    return format_literal(v)


def format_statement(stmt: Statement, parent_prec: int = 0) -> str:
    if isinstance(stmt, Leaf):
        return f"{stmt.rule_id}[{stmt.kind}]{stmt.op}{_value_text(stmt.kind, stmt.value)}"
    prec = _PREC[type(stmt)]
    if isinstance(stmt, SNot):
        text = "NOT " + format_statement(stmt.operand, prec)
    else:
        word = {SAnd: " AND ", SOr: " OR ", SXor: " XOR "}[type(stmt)]
        text = word.join(format_statement(i, prec) for i in stmt.items)
    return f"({text})" if prec <= parent_prec else text


def rule_ids(stmt) -> set:
    return {leaf.rule_id for leaf in leaves(stmt)}

