"""mvdXML -> MVDLite.

A statement is first brought to negation normal form: NOT is pushed to the
leaves, and XOR is expanded unless all its operands are decided at one
template node.  The result is then placed on the template tree: conjuncts
that go through the same child node share that child's binding and are
compiled together below it, conjuncts under different children become
separate chains, and a disjunction that would otherwise need two bindings
of one node is distributed over the conjunction first.
"""
from __future__ import annotations

import re
from typing import Optional

from ..errors import LexError, MvdXmlError, ParseError
from ..ifc.schema import SchemaTable
from ..lang import ast as A
from ..lang import parse
from .doc import MvdXmlDoc, TemplateRule, TemplateRules
from .export import DEFAULT_EXCHANGE
from .statement import Leaf, SAnd, SNot, SOr, SXor, leaves, parse_statement, s_and, s_or
from .template import Template, TNode, stable_uuid

_NON_WORD = re.compile(r"\W")


class _Placer:
    def __init__(self, template: Template):
        self.t = template

    def location(self, s) -> Optional[TNode]:
        """The single node deciding ``s``, or None if its leaves sit at different nodes."""
        locs = {id(self.t.location(leaf)): self.t.location(leaf) for leaf in leaves(s)}
        return next(iter(locs.values())) if len(locs) == 1 else None

    def nnf(self, s, neg: bool = False):
        if isinstance(s, Leaf):
            return SNot(s) if neg else s
        if isinstance(s, SNot):
            return self.nnf(s.operand, not neg)
        if isinstance(s, SXor):
            if self.location(s) is not None:
                return SNot(s) if neg else s
            x = s.items[0]
            for y in s.items[1:]:
                x = SOr((SAnd((x, SNot(y))), SAnd((SNot(x), y))))
            return self.nnf(x, neg)
        items = [self.nnf(i, neg) for i in s.items]
        if isinstance(s, SAnd):
            return s_or(*items) if neg else s_and(*items)
        return s_and(*items) if neg else s_or(*items)

    def support(self, s, anchor: TNode) -> tuple:
        """(children of ``anchor`` that leaves of ``s`` sit under, whether some leaf sits at ``anchor``)."""
        out, here = set(), False
        for leaf in leaves(s):
            n = self.t.location(leaf)
            if n is anchor:
                here = True
                continue
            while n is not None and n.parent is not anchor:
                n = n.parent
            if n is None:
                raise MvdXmlError("statement leaf outside the current template subtree")
            out.add(n)
        return out, here

    def local(self, s):
        """MVDLite filter for a formula decided entirely at one node."""
        if isinstance(s, Leaf):
            node = self.t.node(s.rule_id)
            metric = A.Metric(s.kind, s.op, (s.value,))
            if s.kind in A.COLLECTION_METRICS:
                return A.Chain((A.Attribute(node.attr, node.type), metric))
            return A.Chain((metric,))
        if isinstance(s, SNot):
            return A.Not(self.local(s.operand))
        cls = {SAnd: A.And, SOr: A.Or, SXor: A.Xor}[type(s)]
        return cls(tuple(self.local(i) for i in s.items))

    @staticmethod
    def down(node: TNode, sub) -> A.Chain:
        seg = A.Attribute(node.attr, node.type)
        if isinstance(sub, A.Chain):
            return A.Chain((seg,) + sub.segments)
        return A.Chain((seg, A.Compound(sub)))

    def place(self, s, anchor: TNode):
        if isinstance(s, SOr):
            return A.Or(tuple(self.place(i, anchor) for i in s.items))
        conj = list(s.items) if isinstance(s, SAnd) else [s]
        sups = [self.support(c, anchor) for c in conj]
        for i, c in enumerate(conj):
            sup, here = sups[i]
            if isinstance(c, SOr) and len(sup) + here > 1:
                others = set().union(*(sups[j][0] for j in range(len(conj)) if j != i))
                if sup & others:
                    rest = conj[:i] + conj[i + 1:]
                    return self.place(s_or(*[s_and(*rest, d) for d in c.items]), anchor)
        parts = []
        buckets = {}
        for c, (sup, here) in zip(conj, sups):
            if not sup:
                parts.append(self.local(c))
            elif len(sup) == 1 and not here:
                buckets.setdefault(next(iter(sup)), []).append(c)
            else:
                parts.append(self.place(c, anchor))
        for child, group in buckets.items():
            parts.append(self.down(child, self.place(s_and(*group), child)))
        return parts[0] if len(parts) == 1 else A.And(tuple(parts))

    def statement(self, text: str):
        return self.place(self.nnf(parse_statement(text)), self.t.root)

    def tree(self, item):
        if isinstance(item, TemplateRule):
            return self.statement(item.parameters)
        op = item.operator.lower()
        kids = [self.tree(i) for i in item.items]
        if not kids:
            raise MvdXmlError(f"empty TemplateRules operator={item.operator}")

        def combine(cls):
            return kids[0] if len(kids) == 1 else cls(tuple(kids))

        if op == "and":
            return combine(A.And)
        if op == "or":
            return combine(A.Or)
        if op == "xor":
            return combine(A.Xor)
        if op in ("not", "nand"):
            return A.Not(combine(A.And))
        if op == "nor":
            return A.Not(combine(A.Or))
        if op == "nxor":
            return A.Not(combine(A.Xor))
        raise MvdXmlError(f"unknown TemplateRules operator {item.operator!r}")


def _ident(name: str) -> str:
    out = _NON_WORD.sub("_", name) or "Concept"
    return "_" + out if out[0].isdigit() else out


def marker_expr(text: str):
    try:
        ast = parse(f"IfcRoot {text};")
    except (ParseError, LexError) as exc:
        raise MvdXmlError(f"bad MVDLite marker {text!r}: {exc}") from None
    return ast.rules[0].rule.expr


def compile_rules(doc: MvdXmlDoc, template_uuid: str, rules: TemplateRules, cache: dict):
    if template_uuid not in cache:
        cache[template_uuid] = _Placer(Template.from_concept_template(doc.template(template_uuid), doc))
    return A.normalize(cache[template_uuid].tree(rules))


def from_mvdxml(doc: MvdXmlDoc, schema: Optional[SchemaTable] = None) -> A.RuleSetAst:
    """Convert every ConceptRoot to MVDLite.

    A ConceptRoot named after its entity without applicability yields top-level
    rules; a repeated ConceptRoot name yields top-level rules on that concept;
    any other ConceptRoot becomes a concept extending its entity.
    """
    placers = {}
    concepts, rules = [], []
    names = set()
    for view in doc.views:
        er_names = {er.uuid: er.name for er in view.exchange_requirements}
        for cr in view.roots:
            entity = cr.applicable_root_entity
            cname = _ident(cr.name)
            as_concept = cname not in names and (cr.applicability is not None or cname != entity)
            if as_concept and schema is not None and schema.knows(cname):
                cname = cname + "_Concept"
            root = cname if as_concept or cname in names else entity
            constraint_rules = []
            for c in cr.concepts:
                if c.rules is not None and c.rules.items:
                    expr = compile_rules(doc, c.template, c.rules, placers)
                    if c.markers:
                        raise MvdXmlError(f"concept {c.name!r} has both rules and an MVDLite marker")
                elif len(c.markers) == 1:
                    expr = marker_expr(c.markers[0])
                else:
                    continue  # documentation-only concept
                tags = {"name": c.name}
                if c.uuid != stable_uuid(cr.name, c.name) and c.uuid != stable_uuid(cr.name + "/rules", c.name):
                    tags["uuid"] = c.uuid
                if c.requirements:
                    sev = c.requirements[0].requirement
                    if sev != "mandatory":
                        tags["severity"] = sev
                    ers = [er_names.get(r.exchange_requirement, r.exchange_requirement) for r in c.requirements]
                    if ers != [DEFAULT_EXCHANGE]:
                        tags["exchangeRequirements"] = ers
                constraint_rules.append(A.RuleDef(A.CONSTRAINT, expr, tags))
            if as_concept:
                defs = []
                if cr.applicability is not None and cr.applicability.rules is not None:
                    app = cr.applicability
                    groups = [TemplateRules("and", [i]) for i in app.rules.items] \
                        if app.rules.operator.lower() == "and" else [app.rules]
                    defs = [A.RuleDef(A.DEFINITION, compile_rules(doc, app.template, g, placers)) for g in groups]
                concepts.append(A.ConceptDef(cname, entity, tuple(defs + constraint_rules)))
                names.add(cname)
            else:
                rules.extend(A.TopRule(root, r) for r in constraint_rules)
    return A.RuleSetAst((), tuple(concepts), tuple(rules))
