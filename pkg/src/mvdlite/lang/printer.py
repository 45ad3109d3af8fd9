"""Canonical MVDLite text for any AST stage."""
from __future__ import annotations

import json

from . import ast as A

INDENT = "    "


def format_literal(lit) -> str:
    if isinstance(lit, A.String):
        return "'" + lit.text.replace("'", "''") + "'"
    if isinstance(lit, A.Number):
        if isinstance(lit.value, float):
            text = repr(lit.value)
            if text in ("inf", "-inf", "nan"):
                raise ValueError(f"non-finite number {text} has no MVDLite spelling")
            return text
        return str(lit.value)
    if isinstance(lit, A.Bool):
        return "TRUE" if lit.value else "FALSE"
    if isinstance(lit, A.TypeName):
        return lit.name
    if isinstance(lit, A.Enum):
        return f".{lit.token}."
    raise TypeError(f"not a literal: {lit!r}")


def format_segment(seg) -> str:
    if isinstance(seg, A.Attribute):
        return f"->{seg.name}" + (f":{seg.type}" if seg.type else "")
    if isinstance(seg, A.Metric):
        values = "|".join(format_literal(v) for v in seg.values)
        head = f"[{seg.kind}]" if seg.kind else ""
        return f"{head}{seg.op}{values}"
    if isinstance(seg, A.Compound):
        return "(" + format_expr(seg.expr) + ")"
    if isinstance(seg, A.AbbrevRef):
        return seg.name
    if isinstance(seg, A.NameSugar):
        return format_literal(A.String(seg.text))
    raise TypeError(f"not a segment: {seg!r}")


def format_chain(chain: A.Chain) -> str:
    parts = []
    for i, seg in enumerate(chain.segments):
        text = format_segment(seg)
        # identifiers must not run into the previous token
        if i and isinstance(seg, A.AbbrevRef):
            text = " " + text
        parts.append(text)
    return "".join(parts)


def format_expr(expr) -> str:
    if isinstance(expr, A.Chain):
        return format_chain(expr)
    if isinstance(expr, A.Not):
        return "NOT " + format_expr(expr.operand)
    word = {A.And: " AND ", A.Or: " OR ", A.Xor: " XOR "}[type(expr)]
    return word.join(format_expr(op) for op in expr.operands)


def _tag_line(tags, indent="") -> list:
    if not tags:
        return []
    return [f"{indent}// {json.dumps(tags, sort_keys=True, ensure_ascii=False)}"]


def format_rule_expr(expr) -> str:
    return format_expr(A.normalize(expr))


def format(ast: A.RuleSetAst) -> str:
    """Pretty-print a ruleset.  Parsing the result yields the normalized input."""
    blocks = []
    if ast.header:
        lines = []
        for ab in ast.header:
            lines += _tag_line(ab.tags)
            hint = f"({ab.root_type_hint})" if ab.root_type_hint else ""
            lines.append(f"{ab.name} as {hint}{format_rule_expr(ab.body)};")
        blocks.append("\n".join(lines))
    for c in ast.concepts:
        lines = _tag_line(c.tags)
        lines.append(f"concept {c.name} extends {c.parent} {{")
        kind = None
        for r in c.rules:
            if r.kind != kind:
                kind = r.kind
                lines.append(f"{INDENT}{kind}:")
            lines += _tag_line(r.tags, INDENT * 2)
            lines.append(f"{INDENT * 2}{format_rule_expr(r.expr)};")
        lines.append("}")
        blocks.append("\n".join(lines))
    if ast.rules:
        lines = []
        for tr in ast.rules:
            lines += _tag_line(tr.rule.tags)
            body = format_rule_expr(tr.rule.expr)
            sep = "" if body.startswith("[") or not body else " "
            lines.append(f"{tr.root}{sep}{body};")
        blocks.append("\n".join(lines))
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"
