"""Syntax tree for MVDLite rulesets.

All nodes are frozen dataclasses so trees can be shared between threads and
compared structurally.  Source locations never take part in equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union

METRIC_KINDS = ("Type", "Value", "Size", "Exists", "Unique")
SINGLE_METRICS = ("Type", "Value")
COLLECTION_METRICS = ("Size", "Exists", "Unique")
COMPARATORS = ("=", "!=", ">", ">=", "<", "<=")

DEFINITION = "definition"
CONSTRAINT = "constraint"


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    offset: int


# -- literals ---------------------------------------------------------------

@dataclass(frozen=True)
class String:
    text: str


@dataclass(frozen=True)
class Number:
    value: Union[int, float]

    def __eq__(self, other):
        # 1 and 1.0 print differently, so keep them apart
        return (isinstance(other, Number) and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash((type(self.value), self.value))


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class TypeName:
    name: str


@dataclass(frozen=True)
class Enum:
    token: str


Literal = Union[String, Number, Bool, TypeName, Enum]


def literal_kind(lit: Literal) -> str:
    return type(lit).__name__


# -- segments ---------------------------------------------------------------

@dataclass(frozen=True)
class Attribute:
    name: str
    type: Optional[str] = None


@dataclass(frozen=True)
class Metric:
    """``[kind] op v1 | v2 ...``; ``kind`` is None for the ``=v`` shorthand."""

    kind: Optional[str]
    op: str
    values: tuple

    @property
    def value(self) -> Literal:
        return self.values[0]

    @property
    def is_collection(self) -> bool:
        return self.kind in COLLECTION_METRICS


@dataclass(frozen=True)
class Compound:
    expr: "Expr"


@dataclass(frozen=True)
class AbbrevRef:
    name: str


@dataclass(frozen=True)
class NameSugar:
    """A bare ``'text'`` in fragment position, shorthand for a Name filter."""

    text: str


Segment = Union[Attribute, Metric, Compound, AbbrevRef, NameSugar]


# -- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Chain:
    segments: tuple = ()

    def __len__(self):
        return len(self.segments)


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    operands: tuple


@dataclass(frozen=True)
class Or:
    operands: tuple


@dataclass(frozen=True)
class Xor:
    operands: tuple


Expr = Union[Chain, Not, And, Or, Xor]
Connective = (And, Or, Xor)

_PRECEDENCE = {Or: 1, Xor: 2, And: 3, Not: 4, Chain: 5}


def precedence(expr: Expr) -> int:
    return _PRECEDENCE[type(expr)]


def wrap(expr: Expr) -> Chain:
    """Turn any expression into a chain; connectives become one compound segment."""
    if isinstance(expr, Chain):
        return expr
    return Chain((Compound(expr),))


def normalize(expr: Expr) -> Expr:
    """Flatten nested connectives of the same kind and parenthesize lower-precedence
    operands, so that printing and re-parsing yields an identical tree."""
    if isinstance(expr, Chain):
        return Chain(tuple(_normalize_segment(s) for s in expr.segments))
    if isinstance(expr, Not):
        inner = normalize(expr.operand)
        if precedence(inner) < precedence(expr):
            inner = wrap(inner)
        return Not(inner)
    cls = type(expr)
    ops = []
    for op in expr.operands:
        op = normalize(op)
        if type(op) is cls:
            ops.extend(op.operands)
        elif precedence(op) < precedence(expr):
            ops.append(wrap(op))
        else:
            ops.append(op)
    if len(ops) == 1:
        return ops[0]
    return cls(tuple(ops))


def _normalize_segment(seg):
    if isinstance(seg, Compound):
        return Compound(normalize(seg.expr))
    return seg


def conj(*items: Expr) -> Expr:
    return normalize(And(tuple(items))) if len(items) > 1 else normalize(items[0])


def disj(*items: Expr) -> Expr:
    return normalize(Or(tuple(items))) if len(items) > 1 else normalize(items[0])


def is_filter(expr: Expr) -> bool:
    """True when the expression ends in a metric (acts as a filter on its input)."""
    if isinstance(expr, Chain):
        if not expr.segments:
            return False
        last = expr.segments[-1]
        if isinstance(last, Metric) or isinstance(last, NameSugar):
            return True
        if isinstance(last, Compound):
            return is_filter(last.expr)
        return False
    if isinstance(expr, Not):
        return is_filter(expr.operand)
    return all(is_filter(op) for op in expr.operands)


def walk_segments(expr: Expr):
    """Yield every segment in the expression, including those nested in compounds."""
    if isinstance(expr, Chain):
        for seg in expr.segments:
            yield seg
            if isinstance(seg, Compound):
                yield from walk_segments(seg.expr)
    elif isinstance(expr, Not):
        yield from walk_segments(expr.operand)
    else:
        for op in expr.operands:
            yield from walk_segments(op)


# -- documents --------------------------------------------------------------

@dataclass(frozen=True)
class RuleDef:
    kind: str  # DEFINITION or CONSTRAINT
    expr: Expr
    tags: Optional[dict] = None
    span: Optional[Span] = field(default=None, compare=False)

    @property
    def severity(self) -> str:
        if self.tags and self.tags.get("severity"):
            return str(self.tags["severity"])
        return "mandatory"


@dataclass(frozen=True)
class AbbreviationDef:
    name: str
    root_type_hint: Optional[str]
    body: Chain
    tags: Optional[dict] = None
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class ConceptDef:
    name: str
    parent: str
    rules: tuple = ()
    tags: Optional[dict] = None
    span: Optional[Span] = field(default=None, compare=False)

    @property
    def definition_rules(self) -> tuple:
        return tuple(r for r in self.rules if r.kind == DEFINITION)

    @property
    def constraint_rules(self) -> tuple:
        return tuple(r for r in self.rules if r.kind == CONSTRAINT)


@dataclass(frozen=True)
class TopRule:
    """A rule outside any concept, rooted at an IFC type or a concept name."""

    root: str
    rule: RuleDef
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Comment:
    span: Span
    text: str
    tag: Any = None


@dataclass(frozen=True)
class RuleSetAst:
    header: tuple = ()
    concepts: tuple = ()
    rules: tuple = ()
    comments: tuple = field(default=(), compare=False)

    def concept(self, name: str) -> ConceptDef:
        for c in self.concepts:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def concept_names(self) -> list:
        return [c.name for c in self.concepts]

    def abbreviation(self, name: str) -> AbbreviationDef:
        for a in self.header:
            if a.name == name:
                return a
        raise KeyError(name)
