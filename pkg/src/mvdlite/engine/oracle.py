"""Brute-force reference semantics for mvdXML concepts.

For each root the implied template is matched exhaustively: every template
node that decides some statement leaf (with its ancestors) is bound to one of
its targets, or to nothing when there are none (left outer join).  The
statement is evaluated on every such match with three-valued logic, a leaf on
an unbound node being unknown, and the root passes when some match makes it
true.  This is exponential and only meant for small test models.
"""
from __future__ import annotations

import itertools
from typing import Optional, Union

from ..errors import EvaluationError
from ..ifc.model import Model, ValueNode, attribute_targets
from ..ifc.schema import SchemaTable
from ..lang import ast as A
from ..lang.transform import is_global_chain, top_chains
from ..mvdxml.export import to_mvdxml
from ..mvdxml.importer import marker_expr
from ..mvdxml.doc import Concept, MvdXmlDoc, TemplateRule, TemplateRules
from ..mvdxml.statement import Leaf, SAnd, SNot, SOr, SXor, leaves, parse_statement
from ..mvdxml.template import Template, TNode
from .report import FAIL, NOT_APPLICABLE, PASS
from .values import Incomparable, collection_test, node_value_test, type_test

DEFAULT_MAX_INSTANCES = 5000
DEFAULT_MAX_MATCHES = 200_000


def _and3(vals):
    out = True
    for v in vals:
        if v is False:
            return False
        if v is None:
            out = None
    return out


def _or3(vals):
    out = False
    for v in vals:
        if v is True:
            return True
        if v is None:
            out = None
    return out


class _Matcher:
    def __init__(self, model: Model, schema: SchemaTable, template: Template, max_matches: int, epsilon: float):
        self.model = model
        self.schema = schema
        self.t = template
        self.max_matches = max_matches
        self.epsilon = epsilon

    def targets(self, node, tnode: TNode) -> list:
        return list(attribute_targets(self.model, self.schema, node, tnode.attr, tnode.type))

    def matches(self, root, needed: list):
        """All bindings of the needed template nodes below ``root`` (None = unbound)."""
        kids = {}
        for n in needed:
            for a in n.ancestors()[1:]:
                kids.setdefault(id(a.parent), {})[id(a)] = a

        def expand(tnode: TNode, binding):
            children = list(kids.get(id(tnode), {}).values())
            if not children:
                yield {id(tnode): binding}
                return
            options = []
            for ch in children:
                sub = []
                ts = self.targets(binding, ch) if binding is not None else []
                for t in ts or [None]:
                    sub.extend(expand(ch, t))
                options.append(sub)
            for combo in itertools.product(*options):
                row = {id(tnode): binding}
                for part in combo:
                    row.update(part)
                yield row

        count = 0
        for row in expand(self.t.root, root):
            count += 1
            if count > self.max_matches:
                raise EvaluationError(f"more than {self.max_matches} template matches for root #{root}")
            yield row

    def leaf(self, leaf: Leaf, row: dict):
        loc = self.t.location(leaf)
        b = row.get(id(loc))
        if b is None:
            return None
        lit = leaf.value
        if leaf.kind in A.COLLECTION_METRICS:
            coll = self.targets(b, self.t.node(leaf.rule_id))
            return collection_test(leaf.kind, leaf.op, lit, coll)
        if leaf.kind == "Type":
            name = b.type_name if isinstance(b, ValueNode) else self.model.type_of(b)
            return type_test(name, leaf.op, lit)
        try:
            return node_value_test(b, leaf.op, lit, self.epsilon)
        except Incomparable:
            return False

    def truth(self, s, row: dict):
        if isinstance(s, Leaf):
            return self.leaf(s, row)
        if isinstance(s, SNot):
            v = self.truth(s.operand, row)
            return None if v is None else not v
        vals = [self.truth(i, row) for i in s.items]
        if isinstance(s, SAnd):
            return _and3(vals)
        if isinstance(s, SOr):
            return _or3(vals)
        if any(v is None for v in vals):
            return None
        return sum(vals) % 2 == 1

    def statement_holds(self, stmt, root) -> bool:
        needed = list({id(n): n for n in (self.t.location(x) for x in leaves(stmt))}.values())
        return any(self.truth(stmt, row) is True for row in self.matches(root, needed))

    def tree_holds(self, item: Union[TemplateRule, TemplateRules], root, parsed: dict) -> bool:
        if isinstance(item, TemplateRule):
            stmt = parsed.get(item.parameters)
            if stmt is None:
                stmt = parsed[item.parameters] = parse_statement(item.parameters)
            return self.statement_holds(stmt, root)
        vals = [self.tree_holds(i, root, parsed) for i in item.items]
        op = item.operator.lower()
        if op == "and":
            return all(vals)
        if op == "or":
            return any(vals)
        if op == "xor":
            return sum(vals) % 2 == 1
        if op in ("not", "nand"):
            return not all(vals)
        if op == "nor":
            return not any(vals)
        if op == "nxor":
            return sum(vals) % 2 == 0
        raise EvaluationError(f"unknown TemplateRules operator {item.operator!r}")


def _global_truth(expr, roots) -> bool:
    if isinstance(expr, A.Chain):
        seg = expr.segments[0]
        return collection_test(seg.kind, seg.op, seg.values[0], roots)
    if isinstance(expr, A.Not):
        return not _global_truth(expr.operand, roots)
    vals = [_global_truth(o, roots) for o in expr.operands]
    if isinstance(expr, A.And):
        return all(vals)
    if isinstance(expr, A.Or):
        return any(vals)
    return sum(vals) % 2 == 1


def _marker_verdict(c: Concept, roots: list) -> dict:
    expr = marker_expr(c.markers[0])
    if not all(is_global_chain(ch) for ch in top_chains(expr)):
        raise EvaluationError(f"concept {c.name!r} is carried as MVDLite text; the oracle cannot evaluate it")
    return {None: PASS if _global_truth(expr, roots) else FAIL}


def oracle_doc(model: Model, schema: SchemaTable, doc: MvdXmlDoc, *, max_instances: int = DEFAULT_MAX_INSTANCES,
               max_matches: int = DEFAULT_MAX_MATCHES, epsilon: float = 0.0) -> dict:
    """(ConceptRoot name, Concept name) -> {root id | None: verdict} for every concept in ``doc``."""
    if len(model) > max_instances:
        raise EvaluationError(f"model has {len(model)} instances; the oracle is capped at {max_instances}")
    matchers = {}
    parsed = {}

    def matcher(uuid: str) -> _Matcher:
        if uuid not in matchers:
            matchers[uuid] = _Matcher(model, schema, Template.from_concept_template(doc.template(uuid), doc),
                                      max_matches, epsilon)
        return matchers[uuid]

    out = {}
    for view in doc.views:
        for cr in view.roots:
            roots = model.instances_of(schema.canonical(cr.applicable_root_entity))
            app = cr.applicability
            if app is not None and app.rules is not None:
                m = matcher(app.template)
                roots = [r for r in roots if m.tree_holds(app.rules, r, parsed)]
            for c in cr.concepts:
                if c.markers:
                    out[(cr.name, c.name)] = _marker_verdict(c, roots)
                    continue
                if c.rules is None or not c.rules.items:
                    continue
                if not roots:
                    out[(cr.name, c.name)] = {None: NOT_APPLICABLE}
                    continue
                m = matcher(c.template)
                out[(cr.name, c.name)] = {r: PASS if m.tree_holds(c.rules, r, parsed) else FAIL for r in roots}
    return out


def oracle_validate(model: Model, schema: Optional[SchemaTable], rule, *, strict: bool = False,
                    **limits) -> dict:
    """Verdicts under mvdXML semantics.

    ``rule`` is an mvdXML document or an MVDLite ruleset (converted first).
    Keys are (concept, rule name) pairs matching :meth:`ValidationReport.verdict_map`.
    """
    schema = schema or model.schema
    if isinstance(rule, A.RuleSetAst):
        rule = to_mvdxml(rule, schema, strict=strict)
    return oracle_doc(model, schema, rule, **limits)
