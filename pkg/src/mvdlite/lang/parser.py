"""Recursive-descent parser producing a :class:`RuleSetAst`.

See docs/grammar.md for the reference grammar.
"""
from __future__ import annotations

import json

from ..errors import ParseError
from . import ast as A
from .lexer import (ARROW, COLON, COMMENT, COMPARATOR_TOKENS, ENUM, EOF, IDENT,
                    LBRACE, LBRACKET, LPAREN, NUMBER, PIPE, RBRACE, RBRACKET,
                    RPAREN, SEMI, STRING, Token, tokenize)

CONNECTIVES = ("AND", "OR", "XOR", "NOT")
SECTION_KEYWORDS = (A.DEFINITION, A.CONSTRAINT)
RESERVED = CONNECTIVES + SECTION_KEYWORDS + ("as", "concept", "extends")


def _tag_of(text: str):
    body = text.strip()
    if not body.startswith("{"):
        return None
    try:
        tag = json.loads(body)
    except ValueError:
        return None
    return tag if isinstance(tag, dict) else None


class Parser:
    def __init__(self, tokens: list[Token], source: str | None = None):
        self.source = source
        self.tokens = []
        self.leading = []  # comments immediately before each significant token
        self.comments = []
        pending = []
        for tok in tokens:
            if tok.kind == COMMENT:
                c = A.Comment(A.Span(tok.line, tok.column, tok.offset), tok.value, _tag_of(tok.value))
                pending.append(c)
                self.comments.append(c)
            else:
                self.tokens.append(tok)
                self.leading.append(pending)
                pending = []
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def at(self, kind, value=None) -> bool:
        tok = self.tok
        return tok.kind == kind and (value is None or tok.value == value)

    def at_keyword(self, *words) -> bool:
        return self.tok.kind == IDENT and self.tok.value in words

    def expect(self, kind, value=None, what=None) -> Token:
        if not self.at(kind, value):
            self.error(f"expected {what or value or kind}")
        return self.advance()

    def error(self, message):
        tok = self.tok
        found = "end of input" if tok.kind == EOF else repr(tok.value if tok.value is not None else tok.kind)
        raise ParseError(f"{message}, found {found}", tok.line, tok.column, tok.offset, self.source)

    def span(self) -> A.Span:
        tok = self.tok
        return A.Span(tok.line, tok.column, tok.offset)

    def tag(self):
        """Tag object from the last JSON comment directly before the current token."""
        for c in reversed(self.leading[self.pos]):
            if c.tag is not None:
                return c.tag
        return None

    # -- document -----------------------------------------------------------

    def parse_document(self) -> A.RuleSetAst:
        header, concepts, rules = [], [], []
        names = set()
        abbrevs = set()
        while not self.at(EOF):
            if self.at_keyword("concept"):
                concept = self.parse_concept(names)
                names.add(concept.name)
                concepts.append(concept)
            elif self.at(IDENT) and self.peek().kind == IDENT and self.peek().value == "as":
                abbrev = self.parse_abbreviation()
                if abbrev.name in abbrevs:
                    raise ParseError(f"duplicate abbreviation {abbrev.name!r}",
                                     abbrev.span.line, abbrev.span.column, abbrev.span.offset, self.source)
                abbrevs.add(abbrev.name)
                header.append(abbrev)
            elif self.at(IDENT) or self.at(LPAREN):
                rules.append(self.parse_top_rule())
            else:
                self.error("expected an abbreviation, a concept or a rule")
        return A.RuleSetAst(tuple(header), tuple(concepts), tuple(rules), tuple(self.comments))

    def parse_abbreviation(self) -> A.AbbreviationDef:
        tags, span = self.tag(), self.span()
        name = self.expect(IDENT).value
        if name in RESERVED:
            self.error(f"{name!r} is reserved")
        self.expect(IDENT, "as")
        hint = None
        if self.at(LPAREN) and self.peek().kind == IDENT and self.peek(2).kind == RPAREN:
            self.advance()
            hint = self.advance().value
            self.advance()
        body = self.parse_chain(allow_empty=False)
        self.end_item()
        return A.AbbreviationDef(name, hint, body, tags, span)

    def end_item(self):
        """Consume ``;``.  It may be omitted when the next token plainly starts a new item."""
        if self.at(SEMI):
            self.advance()
            return
        if self.at(EOF) or self.at(RBRACE) or self.at_keyword("concept", *SECTION_KEYWORDS):
            return
        if self.at(IDENT) and self.peek().kind == IDENT and self.peek().value == "as":
            return
        self.error("expected ';'")

    def parse_concept(self, known) -> A.ConceptDef:
        tags, span = self.tag(), self.span()
        self.expect(IDENT, "concept")
        name = self.expect(IDENT, what="concept name").value
        if name in known:
            raise ParseError(f"duplicate concept name {name!r}", span.line, span.column, span.offset, self.source)
        parent = None
        if self.at_keyword("extends"):
            self.advance()
            parent = self.expect(IDENT, what="parent type").value
        else:
            self.error("expected 'extends'")
        self.expect(LBRACE)
        rules = []
        while not self.at(RBRACE):
            if not self.at_keyword(*SECTION_KEYWORDS):
                self.error("expected 'definition' or 'constraint'")
            kind = self.advance().value
            self.expect(COLON)
            while True:
                rtags, rspan = self.tag(), self.span()
                expr = self.parse_expr()
                rules.append(A.RuleDef(kind, expr, rtags, rspan))
                if self.at(SEMI):
                    self.advance()
                elif not (self.at(RBRACE) or self.at_keyword(*SECTION_KEYWORDS)):
                    self.error("expected ';'")
                if self.at(RBRACE) or self.at_keyword(*SECTION_KEYWORDS):
                    break
        self.expect(RBRACE)
        return A.ConceptDef(name, parent, tuple(rules), tags, span)

    def parse_top_rule(self) -> A.TopRule:
        tags, span = self.tag(), self.span()
        if self.at(LPAREN):
            self.advance()
            root = self.expect(IDENT, what="root type").value
            self.expect(RPAREN)
        else:
            root = self.expect(IDENT, what="root type").value
        if root in RESERVED:
            raise ParseError(f"{root!r} is reserved", span.line, span.column, span.offset, self.source)
        if self.at(SEMI) or self.at(EOF):
            expr = A.Chain(())
        else:
            expr = self.parse_expr()
        self.end_item()
        return A.TopRule(root, A.RuleDef(A.CONSTRAINT, expr, tags, span), span)

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> A.Expr:
        return self._binary("OR", A.Or, self.parse_xor)

    def parse_xor(self):
        return self._binary("XOR", A.Xor, self.parse_and)

    def parse_and(self):
        return self._binary("AND", A.And, self.parse_unary)

    def _binary(self, word, cls, sub):
        items = [sub()]
        while self.at_keyword(word):
            self.advance()
            items.append(sub())
        return items[0] if len(items) == 1 else cls(tuple(items))

    def parse_unary(self):
        if self.at_keyword("NOT"):
            self.advance()
            return A.Not(self.parse_unary())
        return self.parse_chain(allow_empty=False)

    def starts_segment(self) -> bool:
        tok = self.tok
        if tok.kind in (ARROW, LPAREN, LBRACKET) or tok.kind in COMPARATOR_TOKENS:
            return True
        if tok.kind == IDENT:
            if tok.value in RESERVED:
                return False
            # `name as ...` begins the next abbreviation
            return not (self.peek().kind == IDENT and self.peek().value == "as")
        return False

    def parse_chain(self, allow_empty=True) -> A.Chain:
        segments = []
        if self.at(STRING):
            segments.append(A.NameSugar(self.advance().value))
        while self.starts_segment():
            segments.append(self.parse_segment())
        if not segments and not allow_empty:
            self.error("expected a rule segment")
        return A.Chain(tuple(segments))

    def parse_segment(self):
        tok = self.tok
        if tok.kind == ARROW:
            self.advance()
            name = self.expect(IDENT, what="attribute name").value
            typ = None
            if self.at(COLON):
                self.advance()
                typ = self.expect(IDENT, what="entity type").value
            return A.Attribute(name, typ)
        if tok.kind == LBRACKET:
            self.advance()
            kind_tok = self.expect(IDENT, what="metric name")
            if kind_tok.value not in A.METRIC_KINDS:
                raise ParseError(f"unknown metric [{kind_tok.value}]", kind_tok.line, kind_tok.column,
                                 kind_tok.offset, self.source)
            self.expect(RBRACKET)
            return self.parse_metric_tail(kind_tok.value)
        if tok.kind in COMPARATOR_TOKENS:
            return self.parse_metric_tail(None)
        if tok.kind == LPAREN:
            self.advance()
            expr = self.parse_expr()
            self.expect(RPAREN)
            return A.Compound(expr)
        if tok.kind == IDENT:
            return A.AbbrevRef(self.advance().value)
        self.error("expected a rule segment")

    def parse_metric_tail(self, kind) -> A.Metric:
        if self.tok.kind not in COMPARATOR_TOKENS:
            self.error("expected a comparator")
        op = COMPARATOR_TOKENS[self.advance().kind]
        values = [self.parse_literal()]
        while self.at(PIPE):
            self.advance()
            values.append(self.parse_literal())
        kinds = {"Number" if isinstance(v, A.Number) else A.literal_kind(v) for v in values}
        if len(kinds) > 1:
            self.error("alternative values must share one literal kind")
        return A.Metric(kind, op, tuple(values))

    def parse_literal(self):
        tok = self.tok
        if tok.kind == STRING:
            self.advance()
            return A.String(tok.value)
        if tok.kind == NUMBER:
            self.advance()
            return A.Number(tok.value)
        if tok.kind == ENUM:
            self.advance()
            return A.Enum(tok.value)
        if tok.kind == IDENT and tok.value not in RESERVED:
            self.advance()
            if tok.value.upper() in ("TRUE", "FALSE"):
                return A.Bool(tok.value.upper() == "TRUE")
            return A.TypeName(tok.value)
        self.error("expected a value")


def parse_ruleset(tokens_or_text, source: str | None = None) -> A.RuleSetAst:
    """Parse a token list (from :func:`tokenize`) or raw ruleset text."""
    tokens = tokenize(tokens_or_text, source) if isinstance(tokens_or_text, str) else tokens_or_text
    return Parser(tokens, source).parse_document()
