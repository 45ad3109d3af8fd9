"""MVDLite -> mvdXML.

Every concept becomes one ConceptRoot with a single ConceptTemplate holding
the union of its rule paths.  Each constraint rule becomes a Concept whose
TemplateRules tree mirrors the rule's root-level connectives; every
top-level chain becomes one statement over RuleIDs of the template.

Statements are evaluated per template match (one binding per template node),
so a conjunction may only combine parts whose paths leave a node through
different template children; NOT and XOR only apply to parts decided at a
single node.  Anything else raises :class:`InexpressibleError`, or in lenient
mode is kept as MVDLite text in a marker comment.
"""
from __future__ import annotations

from typing import Optional

from ..errors import InexpressibleError
from ..ifc.schema import SchemaTable
from ..lang import ast as A
from ..lang.printer import format_rule_expr
from ..lang.rules import ancestors, rule_entries, root_entity
from ..lang.transform import is_global_chain, resolve, top_chains
from .doc import (Applicability, Concept, ConceptRoot, ExchangeRequirement, ModelView, MvdXmlDoc,
                  Requirement, TemplateRule, TemplateRules)
from .statement import Leaf, SAnd, SNot, SOr, SXor, format_statement, leaves, s_and, s_or
from .template import Template, TNode, stable_uuid

DEFAULT_EXCHANGE = "Default"
TRUE = A.Bool(True)


class _Compiler:
    def __init__(self, template: Template):
        self.t = template

    def support(self, stmt, anchor: TNode) -> set:
        """Children of ``anchor`` through which the statement's leaves are located."""
        out = set()
        for leaf in leaves(stmt):
            n = self.t.location(leaf)
            if n is anchor:
                continue
            while n.parent is not anchor:
                n = n.parent
                if n is None:
                    raise AssertionError("leaf outside the anchor subtree")
            out.add(n)
        return out

    def chain(self, segs: tuple, anchor: TNode):
        parts = []
        uses = []       # [anchor node, set of children used]
        cur = anchor
        attr_use = None
        for i, seg in enumerate(segs):
            if isinstance(seg, A.Attribute):
                nxt = cur.child(seg.name, seg.type)
                attr_use = [cur, {nxt}]
                uses.append(attr_use)
                cur = nxt
                continue
            if isinstance(seg, A.Metric):
                if seg.is_collection:
                    parts.append(Leaf(self.t.rid(cur), seg.kind, seg.op, seg.values[0]))
                    uses.remove(attr_use)
                    cur = cur.parent
                else:
                    if cur.parent is None:
                        raise InexpressibleError(f"[{seg.kind}] on the root entity has no RuleID to refer to")
                    parts.append(Leaf(self.t.rid(cur), seg.kind, seg.op, seg.values[0]))
            elif isinstance(seg, A.Compound):
                if A.is_filter(seg.expr):
                    s = self.filter(seg.expr, cur)
                else:
                    branches = seg.expr.operands if isinstance(seg.expr, A.Or) else (seg.expr,)
                    if not all(isinstance(b, A.Chain) for b in branches):
                        raise InexpressibleError("AND, XOR and NOT over path fragments have no mvdXML form")
                    rest = segs[i + 1:]
                    s = s_or(*[self.chain(b.segments + rest, cur) for b in branches])
                    parts.append(s)
                    uses.append([cur, self.support(s, cur)])
                    attr_use = None
                    break
                parts.append(s)
                uses.append([cur, self.support(s, cur)])
            attr_use = None
        else:
            if attr_use is not None:
                # a trailing attribute only asks for existence
                parts.append(Leaf(self.t.rid(cur), "Exists", "=", TRUE))
                uses.remove(attr_use)
        self._check_disjoint(uses)
        return s_and(*parts)

    @staticmethod
    def _check_disjoint(uses):
        seen = {}
        for node, kids in uses:
            taken = seen.setdefault(id(node), set())
            clash = taken & kids
            if clash:
                path = next(iter(clash)).path()
                raise InexpressibleError(f"two independent paths through {path} in one conjunction")
            taken |= kids

    def filter(self, expr, anchor: TNode):
        if isinstance(expr, A.Chain):
            return self.chain(expr.segments, anchor)
        if isinstance(expr, A.Not):
            s = self.filter(expr.operand, anchor)
            if self.support(s, anchor):
                raise InexpressibleError("NOT over a path fragment (it must test the current node only)")
            return SNot(s)
        parts = [self.filter(o, anchor) for o in expr.operands]
        if isinstance(expr, A.Or):
            return s_or(*parts)
        if isinstance(expr, A.Xor):
            if any(self.support(p, anchor) for p in parts):
                raise InexpressibleError("XOR over path fragments (they must test the current node only)")
            return SXor(tuple(parts))
        self._check_disjoint([[anchor, self.support(p, anchor)] for p in parts])
        return s_and(*parts)

    def tree(self, expr):
        """Root-level expression -> TemplateRule / TemplateRules."""
        if isinstance(expr, A.Chain):
            return TemplateRule(format_statement(self.chain(expr.segments, self.t.root)))
        if isinstance(expr, A.Not):
            return TemplateRules("not", [self.tree(expr.operand)])
        op = {A.And: "and", A.Or: "or", A.Xor: "xor"}[type(expr)]
        return TemplateRules(op, [self.tree(o) for o in expr.operands])


def _as_rules(item) -> TemplateRules:
    return item if isinstance(item, TemplateRules) else TemplateRules("and", [item])


def _requirements(rule: A.RuleDef, ers: dict) -> list:
    tags = rule.tags or {}
    names = tags.get("exchangeRequirements") or [DEFAULT_EXCHANGE]
    if isinstance(names, str):
        names = [names]
    out = []
    for n in names:
        n = str(n)
        if n not in ers:
            ers[n] = ExchangeRequirement(stable_uuid("exchange", n), n)
        out.append(Requirement(ers[n].uuid, rule.severity))
    return out


def _concept(root_name: str, name: str, rule: A.RuleDef, template: Template, template_uuid: str, ers: dict,
             strict: bool) -> Concept:
    tags = rule.tags or {}
    c = Concept(str(tags.get("uuid") or stable_uuid(root_name, name)), name, template_uuid,
                _requirements(rule, ers), definition=format_rule_expr(rule.expr))
    expr = rule.expr
    chains = list(top_chains(expr))
    if chains and all(is_global_chain(ch) for ch in chains):
        if strict:
            raise InexpressibleError(f"{root_name}/{name}: a metric over the whole root set has no mvdXML form")
        c.markers.append(format_rule_expr(expr))
        return c
    try:
        c.rules = _as_rules(_Compiler(template).tree(expr))
    except InexpressibleError as exc:
        if strict:
            raise InexpressibleError(f"{root_name}/{name}: {exc}") from None
        c.markers.append(format_rule_expr(expr))
    return c


def to_mvdxml(ast: A.RuleSetAst, schema: SchemaTable, *, strict: bool = False, name: str = "MVDLite export",
              resolved: bool = False) -> MvdXmlDoc:
    """Convert a ruleset to an mvdXML document.

    With ``strict`` any rule without an mvdXML form raises
    :class:`InexpressibleError`; otherwise it is carried as a marker comment.
    Definition rules must always be expressible.
    """
    if not resolved:
        ast = resolve(ast, schema)
    doc = MvdXmlDoc(stable_uuid("doc", name), name)
    ers = {}
    view = ModelView(stable_uuid("view", name), name, schema.schema_id)
    entries = rule_entries(ast)
    by_name = {c.name: c for c in ast.concepts}

    def applicability(concept: str, template: Template, tpl_uuid: str) -> Optional[Applicability]:
        items = []
        for anc in reversed(ancestors(ast, concept)):
            for d in by_name[anc].definition_rules:
                if any(is_global_chain(ch) for ch in top_chains(d.expr)):
                    raise InexpressibleError(f"{anc}: definition rules cannot be global metrics")
                try:
                    items.append(_Compiler(template).tree(d.expr))
                except InexpressibleError as exc:
                    raise InexpressibleError(f"{anc} definition: {exc}") from None
        if not items:
            return None
        return Applicability(tpl_uuid, TemplateRules("and", items), stable_uuid(concept, "applicability"))

    def root(concept_name: str, key: str, selected) -> ConceptRoot:
        entity = schema.canonical(root_entity(ast, concept_name))
        template = Template(entity)
        tpl_uuid = stable_uuid(key, "template")
        app = applicability(concept_name, template, tpl_uuid) if concept_name in by_name else None
        cr = ConceptRoot(stable_uuid(key), concept_name, entity, app)
        tags = by_name[concept_name].tags if concept_name in by_name else None
        if tags and tags.get("uuid"):
            cr.uuid = str(tags["uuid"])
        for e in selected:
            cr.concepts.append(_concept(concept_name, e.name, e.rule, template, tpl_uuid, ers, strict))
        doc.templates.append(template.to_concept_template(tpl_uuid, f"{concept_name} paths", schema.schema_id))
        return cr

    for c in ast.concepts:
        view.roots.append(root(c.name, c.name, [e for e in entries if e.concept == c.name and not e.top]))
    top_roots = []
    for e in entries:
        if e.top and e.concept not in top_roots:
            top_roots.append(e.concept)
    for r in top_roots:
        view.roots.append(root(r, r + "/rules", [e for e in entries if e.top and e.concept == r]))
    if not ers:
        ers[DEFAULT_EXCHANGE] = ExchangeRequirement(stable_uuid("exchange", DEFAULT_EXCHANGE), DEFAULT_EXCHANGE)
    view.exchange_requirements = list(ers.values())
    doc.views.append(view)
    return doc
