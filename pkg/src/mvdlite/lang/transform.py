"""AST rewrites: desugaring, abbreviation expansion and schema-driven type completion."""
from __future__ import annotations

from dataclasses import replace
from typing import Callable, Optional

from ..errors import ResolveError, UnknownTypeError
from ..ifc.schema import SchemaTable
from . import ast as A
from .printer import format_literal

# -- generic traversal ---------------------------------------------------------


def map_rule_exprs(ast: A.RuleSetAst, fn: Callable, header: bool = True) -> A.RuleSetAst:
    """Apply ``fn(expr, context)`` to every expression in the document.

    ``context`` is ("abbrev", def) / ("concept", concept) / ("rule", top rule).
    """
    new_header = tuple(replace(ab, body=A.wrap(fn(ab.body, ("abbrev", ab)))) for ab in ast.header) \
        if header else ast.header
    concepts = tuple(
        replace(c, rules=tuple(replace(r, expr=fn(r.expr, ("concept", c))) for r in c.rules))
        for c in ast.concepts)
    rules = tuple(replace(t, rule=replace(t.rule, expr=fn(t.rule.expr, ("rule", t)))) for t in ast.rules)
    return A.RuleSetAst(new_header, concepts, rules, ast.comments)


def map_chains(expr, fn: Callable):
    """Rebuild an expression bottom-up, passing every chain (after its compounds) to ``fn``."""
    if isinstance(expr, A.Chain):
        segs = []
        for s in expr.segments:
            if isinstance(s, A.Compound):
                s = A.Compound(map_chains(s.expr, fn))
            segs.append(s)
        return fn(A.Chain(tuple(segs)))
    if isinstance(expr, A.Not):
        return A.Not(map_chains(expr.operand, fn))
    return type(expr)(tuple(map_chains(o, fn) for o in expr.operands))


# -- desugar ------------------------------------------------------------------------

NAME_ATTRIBUTE = "Name"


def _name_filter(text: str) -> A.Chain:
    return A.Chain((A.Attribute(NAME_ATTRIBUTE), A.Metric("Value", "=", (A.String(text),))))


def _desugar_chain(chain: A.Chain):
    segs = list(chain.segments)
    out = []
    for i, seg in enumerate(segs):
        if isinstance(seg, A.NameSugar):
            if len(segs) == 1:
                return _name_filter(seg.text)
            out.append(A.Compound(_name_filter(seg.text)))
        elif isinstance(seg, A.Metric):
            kind = seg.kind or "Value"
            if len(seg.values) == 1:
                out.append(A.Metric(kind, seg.op, seg.values))
            elif kind in A.COLLECTION_METRICS:
                if out and isinstance(out[-1], A.Attribute):
                    attr = out.pop()
                    out.append(A.Compound(A.Or(tuple(
                        A.Chain((attr, A.Metric(kind, seg.op, (v,)))) for v in seg.values))))
                elif not out:
                    # global form: alternatives become a disjunction of whole chains
                    rest = A.Chain(tuple(segs[i + 1:]))
                    branches = tuple(_desugar_chain(A.Chain((A.Metric(kind, seg.op, (v,)),) + rest.segments))
                                     for v in seg.values)
                    return A.Or(branches)
                else:
                    raise ResolveError(f"[{kind}] must follow an attribute segment")
            else:
                out.append(A.Compound(A.Or(tuple(A.Chain((A.Metric(kind, seg.op, (v,)),)) for v in seg.values))))
        else:
            out.append(seg)
    return A.Chain(tuple(out))


def desugar_expr(expr):
    return A.normalize(map_chains(expr, _desugar_chain))


def desugar(ast: A.RuleSetAst) -> A.RuleSetAst:
    """Remove the three sugared forms: bare comparators, name strings and ``|`` alternatives."""
    return map_rule_exprs(ast, lambda e, ctx: desugar_expr(e))


def is_sugar_free(expr) -> bool:
    for seg in A.walk_segments(expr):
        if isinstance(seg, A.NameSugar):
            return False
        if isinstance(seg, A.Metric) and (seg.kind is None or len(seg.values) != 1):
            return False
    return True


# -- abbreviations ----------------------------------------------------------------------


def _splice(body: A.Chain) -> tuple:
    """Segments replacing an abbreviation reference.  A metric-ended body acts as a filter."""
    if A.is_filter(body):
        return (A.Compound(body),)
    return body.segments


def expand_abbreviations(ast: A.RuleSetAst, schema: Optional[SchemaTable] = None) -> A.RuleSetAst:
    """Replace every abbreviation reference by its (recursively expanded) body.

    With a schema, each abbreviation's root type hint is checked against the
    static nodeset type at the splice point.
    """
    defs = {ab.name: ab for ab in ast.header}
    done = {}

    def expand_body(name, stack):
        if name in done:
            return done[name]
        if name in stack:
            cycle = " -> ".join(stack[stack.index(name):] + [name])
            raise ResolveError(f"cyclic abbreviation reference: {cycle}")
        if name not in defs:
            raise ResolveError(f"unknown abbreviation {name!r}")
        body = expand_expr(defs[name].body, stack + [name])
        done[name] = A.wrap(body)
        return done[name]

    def expand_expr(expr, stack):
        def chain_fn(chain):
            segs = []
            for s in chain.segments:
                if isinstance(s, A.AbbrevRef):
                    segs.extend(_splice(expand_body(s.name, stack)))
                else:
                    segs.append(s)
            return A.Chain(tuple(segs))
        return A.normalize(map_chains(expr, chain_fn))

    header = tuple(replace(ab, body=expand_body(ab.name, [])) for ab in ast.header)
    out = map_rule_exprs(A.RuleSetAst(header, ast.concepts, ast.rules, ast.comments),
                         lambda e, ctx: expand_expr(e, []), header=False)
    if schema is not None:
        _check_hints(ast, schema)
    return out


def _check_hints(ast: A.RuleSetAst, schema: SchemaTable):
    """Walk the unexpanded rules with a typer and compare hints at every reference."""
    defs = {ab.name: ab for ab in ast.header}
    typer = Typer(schema, ast)

    def on_ref(ref: A.AbbrevRef, static_type):
        ab = defs.get(ref.name)
        if ab is None or not ab.root_type_hint or static_type is None:
            return
        if not schema.knows(ab.root_type_hint):
            raise ResolveError(f"abbreviation {ab.name}: unknown root type {ab.root_type_hint}")
        if not (schema.members(static_type) & schema.members(ab.root_type_hint)):
            raise ResolveError(f"abbreviation {ab.name} expects {ab.root_type_hint} but is used on {static_type}")

    def on_ref_typed(ref, static_type):
        on_ref(ref, static_type)
        body = defs[ref.name].body if ref.name in defs else None
        return body

    typer.on_abbrev = on_ref_typed
    for c in ast.concepts:
        root = typer.root_type(c.name)
        for r in c.rules:
            typer.walk_rule(r.expr, root, fill=False)
    for t in ast.rules:
        typer.walk_rule(t.rule.expr, typer.root_type(t.root), fill=False)


# -- typing and completion ----------------------------------------------------------------


class Typer:
    """Static nodeset types along rule chains; fills or checks attribute type constraints."""

    def __init__(self, schema: SchemaTable, ast: A.RuleSetAst):
        self.schema = schema
        self.concepts = {c.name: c for c in ast.concepts}
        self.on_abbrev = None

    def root_type(self, name: str) -> str:
        seen = set()
        while name in self.concepts:
            if name in seen:
                raise ResolveError(f"cyclic concept inheritance at {name}")
            seen.add(name)
            name = self.concepts[name].parent
        try:
            return self.schema.entity(name).name
        except UnknownTypeError:
            raise ResolveError(f"unknown root type {name!r}") from None

    # each walker returns (new expr, resulting static type)

    def walk_rule(self, expr, root_type: str, fill: bool = True):
        """Type a rule's root-level expression; operands are top-level chains."""
        if isinstance(expr, A.Chain):
            chain, _ = self.walk_chain(expr, root_type, top=True, fill=fill)
            return chain
        if isinstance(expr, A.Not):
            return A.Not(self.walk_rule(expr.operand, root_type, fill))
        return type(expr)(tuple(self.walk_rule(o, root_type, fill) for o in expr.operands))

    def walk_chain(self, chain: A.Chain, t: Optional[str], top: bool = False, fill: bool = True):
        schema = self.schema
        stack = []  # types before each attribute segment still open for a collection metric
        out = []
        for i, seg in enumerate(chain.segments):
            if isinstance(seg, A.Attribute):
                new_seg, nt = self.step(seg, t, fill)
                stack.append(t)
                out.append(new_seg)
                t = nt
            elif isinstance(seg, A.Metric):
                self.check_metric(seg)
                if seg.kind in A.COLLECTION_METRICS:
                    if out and isinstance(out[-1], (A.Attribute, A.AbbrevRef)) and stack:
                        t = stack.pop()
                    elif not (top and i == 0):
                        raise ResolveError(f"[{seg.kind}] must follow an attribute segment")
                    elif len(chain.segments) > 1:
                        raise ResolveError(f"a global [{seg.kind}] rule cannot continue after the metric")
                elif top and i == 0:
                    raise ResolveError(f"[{seg.kind}] cannot start a rule chain; it needs an input nodeset")
                out.append(seg)
            elif isinstance(seg, A.Compound):
                expr, nt = self.walk_compound(seg.expr, t, fill)
                out.append(A.Compound(expr))
                t = nt
                stack.clear()
            elif isinstance(seg, A.AbbrevRef):
                body = self.on_abbrev(seg, t) if self.on_abbrev else None
                stack.clear()
                if body is None:
                    t = None
                elif not A.is_filter(body):
                    # an attribute-ended body leaves its last step open for a collection metric
                    if body.segments and isinstance(body.segments[-1], A.Attribute):
                        _, pt = self.walk_chain(A.Chain(body.segments[:-1]), t, fill=False)
                        stack.append(pt)
                    _, t = self.walk_chain(body, t, fill=False)
                out.append(seg)
            else:
                out.append(seg)
        return A.Chain(tuple(out)), t

    def walk_compound(self, expr, t, fill):
        kinds = set()

        def visit(e):
            if isinstance(e, A.Chain):
                if not e.segments:
                    raise ResolveError("empty fragment in compound segment")
                new, rt = self.walk_chain(e, t, fill=fill)
                kinds.add(A.is_filter(new))
                return new, [rt]
            if isinstance(e, A.Not):
                new, rts = visit(e.operand)
                return A.Not(new), rts
            parts = [visit(o) for o in e.operands]
            return type(e)(tuple(p[0] for p in parts)), [r for p in parts for r in p[1]]

        new, rts = visit(expr)
        if len(kinds) > 1:
            raise ResolveError("a compound segment cannot mix metric-ended and path fragments")
        if kinds == {True}:
            return new, t  # filter: the nodeset type is unchanged
        return new, self.common_type(rts)

    def common_type(self, types):
        types = [x for x in types]
        if not types or any(x is None for x in types):
            return None
        first = types[0]
        if all(x == first for x in types):
            return first
        if all(self.schema.is_entity(x) for x in types):
            common = None
            for cand in self.schema.supertypes(first):
                if all(self.schema.is_subtype(x, cand) for x in types):
                    common = cand
                    break
            return common
        return None

    def step(self, seg: A.Attribute, t: Optional[str], fill: bool):
        schema = self.schema
        explicit = seg.type
        if explicit is not None:
            if not schema.knows(explicit):
                raise ResolveError(f"->{seg.name}:{explicit}: unknown type {explicit}")
            explicit = schema.canonical(explicit)
        if t is None:
            if explicit is None and fill:
                raise ResolveError(f"->{seg.name}: cannot infer the input type; add an explicit type constraint")
            return (A.Attribute(seg.name, explicit) if fill else seg), explicit
        declared = self.declared_type(t, seg.name)
        if declared is None:
            raise ResolveError(f"attribute {seg.name!r} is not defined on {t}")
        if explicit is not None:
            if not schema.is_compatible(explicit, declared):
                raise ResolveError(f"->{seg.name}:{explicit} is incompatible with declared type {declared}")
            return (A.Attribute(seg.name, seg.type) if fill else seg), explicit
        return (A.Attribute(seg.name, declared) if fill else seg), declared

    def declared_type(self, t: str, attr: str) -> Optional[str]:
        schema = self.schema
        if schema.is_entity(t):
            d = schema.attribute_type(t, attr)
            if d is not None:
                return d
        # the attribute may live on subtypes or select members only
        definers = schema.entities_defining(attr, t) if schema.knows(t) else []
        types = {schema.attribute_type(d, attr) for d in definers}
        if not types:
            return None
        if len(types) == 1:
            return types.pop()
        common = self.common_type(sorted(types))
        if common is None:
            raise ResolveError(f"attribute {attr!r} has different types on members of {t}; "
                               f"add an explicit type constraint")
        return common

    def check_metric(self, seg: A.Metric):
        kind, op = seg.kind, seg.op
        for v in seg.values:
            if kind == "Size":
                if not isinstance(v, A.Number):
                    raise ResolveError(f"[Size] compares with a number, not {format_literal(v)}")
            elif kind in ("Exists", "Unique"):
                if not isinstance(v, A.Bool) or op not in ("=", "!="):
                    raise ResolveError(f"[{kind}] takes =TRUE/FALSE or !=TRUE/FALSE")
            elif kind == "Type":
                if not isinstance(v, A.TypeName) or op not in ("=", "!="):
                    raise ResolveError("[Type] takes = or != with a type name")
                if not self.schema.knows(v.name):
                    raise ResolveError(f"[Type]: unknown type {v.name}")
            elif kind == "Value":
                if isinstance(v, A.TypeName):
                    raise ResolveError(f"[Value] cannot compare with the bare identifier {v.name}")


def top_chains(expr):
    """The operand chains of a rule's root-level expression."""
    if isinstance(expr, A.Chain):
        yield expr
    elif isinstance(expr, A.Not):
        yield from top_chains(expr.operand)
    else:
        for o in expr.operands:
            yield from top_chains(o)


def is_global_chain(chain: A.Chain) -> bool:
    """A top-level chain that is a single collection metric over the whole root set."""
    return bool(chain.segments) and isinstance(chain.segments[0], A.Metric) and chain.segments[0].is_collection


def complete_types(ast: A.RuleSetAst, schema: SchemaTable) -> A.RuleSetAst:
    """Give every attribute segment an explicit type constraint and check the rules against the schema."""
    typer = Typer(schema, ast)
    names = set()
    for c in ast.concepts:
        if schema.knows(c.name):
            raise ResolveError(f"concept name {c.name!r} collides with a schema type")
        if c.parent not in names and not schema.is_entity(c.parent):
            raise ResolveError(f"concept {c.name} extends unknown or later concept {c.parent!r}")
        names.add(c.name)
    for ab in ast.header:
        if any(isinstance(s, A.AbbrevRef) for s in A.walk_segments(ab.body)):
            raise ResolveError("expand abbreviations before completing types")

    def fn(expr, ctx):
        kind, node = ctx
        if kind == "abbrev":
            if node.root_type_hint is None:
                return expr
            root = typer.root_type(node.root_type_hint)
            chain, _ = typer.walk_chain(A.wrap(expr), root)
            return chain
        root = typer.root_type(node.name if kind == "concept" else node.root)
        out = A.normalize(typer.walk_rule(expr, root))
        flags = {is_global_chain(c) for c in top_chains(out)}
        if True in flags:
            if len(flags) > 1:
                raise ResolveError("a rule cannot mix global metrics with per-instance chains")
            if kind == "concept" and any(r.expr == expr and r.kind == A.DEFINITION for r in node.rules):
                raise ResolveError(f"concept {node.name}: a definition rule cannot be a global metric")
        return out

    return map_rule_exprs(ast, fn)


def resolve(ast: A.RuleSetAst, schema: SchemaTable) -> A.RuleSetAst:
    """Full front-end pipeline: desugar, expand abbreviations, complete types."""
    return complete_types(expand_abbreviations(desugar(ast), schema), schema)
