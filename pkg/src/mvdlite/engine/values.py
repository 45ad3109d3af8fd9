"""Comparison semantics shared by the engine and the row oracle."""
from __future__ import annotations

from ..ifc.model import ValueNode
from ..ifc.step import UNKNOWN, EnumToken, Ref, Typed
from ..lang import ast as A


class Incomparable(Exception):
    """Operands cannot be compared; the node fails the filter."""


def unwrap(value):
    while isinstance(value, Typed):
        value = value.value
    return value


def _cmp(a, op, b) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    raise ValueError(op)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, (bool, Ref))


def compare_value(value, op: str, lit, epsilon: float = 0.0) -> bool:
    """``value op literal`` for a decoded SPF value.  Raises :class:`Incomparable`."""
    v = unwrap(value)
    if isinstance(lit, A.Number):
        if not _is_number(v):
            raise Incomparable
        x = lit.value
        if epsilon and op in ("=", "!="):
            close = abs(v - x) <= epsilon
            return close if op == "=" else not close
        return _cmp(v, op, x)
    if isinstance(lit, A.Bool):
        if v is True or v is False:
            if op in ("=", "!="):
                return _cmp(v, op, lit.value)
            raise Incomparable
        if v is UNKNOWN and op in ("=", "!="):
            return op == "!="
        raise Incomparable
    if isinstance(lit, A.String):
        if isinstance(v, str) and not isinstance(v, Ref):
            return _cmp(str(v), op, lit.text)
        raise Incomparable
    if isinstance(lit, A.Enum):
        tok = lit.token.upper()
        if isinstance(v, EnumToken):
            return _cmp(str(v), op, tok) if op in ("=", "!=") else _raise()
        if v is True or v is False or v is UNKNOWN:
            logical = {"T": True, "F": False, "U": UNKNOWN, "TRUE": True, "FALSE": False, "UNKNOWN": UNKNOWN}
            if tok in logical and op in ("=", "!="):
                return (v is logical[tok]) == (op == "=")
        raise Incomparable
    raise Incomparable


def _raise():
    raise Incomparable


def node_value_test(node, op: str, lit, epsilon: float = 0.0) -> bool:
    """[Value] on a node; instance nodes have no value."""
    if not isinstance(node, ValueNode):
        raise Incomparable
    return compare_value(node.value, op, lit, epsilon)


def type_test(type_name: str, op: str, lit) -> bool:
    same = type_name is not None and type_name.upper() == lit.name.upper()
    return same if op == "=" else not same


def normalized(node):
    """Key used by [Unique]: the unwrapped value for value nodes, the id for instances."""
    if isinstance(node, ValueNode):
        v = unwrap(node.value)
        if _is_number(v):
            return ("n", float(v))
        return (type(v).__name__, v if not isinstance(v, str) else str(v))
    return ("#", node)


def collection_test(kind: str, op: str, lit, members) -> bool:
    """[Size]/[Exists]/[Unique] over one parent's target collection."""
    members = list(members)
    if kind == "Size":
        return _cmp(len(members), op, lit.value)
    if kind == "Exists":
        return _cmp(bool(members), op, lit.value)
    if kind == "Unique":
        keys = [normalized(m) for m in members]
        return _cmp(len(set(keys)) == len(keys), op, lit.value)
    raise ValueError(kind)
