"""Concept template trees: nodes are (attribute, entity) steps from the applicable entity."""
from __future__ import annotations

import re
import uuid
from typing import Optional

from ..errors import MvdXmlError
from .doc import AttributeRule, ConceptTemplate, EntityRule, MvdXmlDoc
from .statement import Leaf

_BASE = uuid.uuid5(uuid.NAMESPACE_URL, "urn:mvdlite")
_ID_CHARS = re.compile(r"\W")


def stable_uuid(*parts: str) -> str:
    """Deterministic uuid5 over ``part1/part2/...``."""
    return str(uuid.uuid5(_BASE, "/".join(parts)))


class TNode:
    __slots__ = ("attr", "type", "parent", "children", "rule_id")

    def __init__(self, attr: Optional[str], type: Optional[str], parent: Optional["TNode"]):
        self.attr = attr
        self.type = type
        self.parent = parent
        self.children = {}
        self.rule_id = None

    def child(self, attr: str, type: Optional[str]) -> "TNode":
        key = (attr, type)
        hit = self.children.get(key)
        if hit is None:
            hit = self.children[key] = TNode(attr, type, self)
        return hit

    def path(self) -> str:
        parts = []
        n = self
        while n.parent is not None:
            parts.append(f"->{n.attr}" + (f":{n.type}" if n.type else ""))
            n = n.parent
        return "".join(reversed(parts))

    def ancestors(self) -> list:
        """Nodes from the root down to self."""
        out = []
        n = self
        while n is not None:
            out.append(n)
            n = n.parent
        return out[::-1]

    def __repr__(self):
        return f"TNode({self.path() or self.type})"


class Template:
    """A template tree with RuleIDs assigned on first reference."""

    def __init__(self, entity: str):
        self.root = TNode(None, entity, None)
        self.by_id = {}

    def rid(self, node: TNode) -> str:
        if node.parent is None:
            raise MvdXmlError("the template root carries no RuleID")
        if node.rule_id is None:
            base = _ID_CHARS.sub("_", node.attr)
            name, k = base, 2
            while name in self.by_id:
                name, k = f"{base}_{k}", k + 1
            node.rule_id = name
            self.by_id[name] = node
        return node.rule_id

    def node(self, rule_id: str) -> TNode:
        try:
            return self.by_id[rule_id]
        except KeyError:
            raise MvdXmlError(f"statement references unknown RuleID {rule_id!r}") from None

    def location(self, leaf: Leaf) -> TNode:
        """Node whose binding decides the leaf: the node itself, or its parent for collection metrics."""
        n = self.node(leaf.rule_id)
        if leaf.kind in ("Size", "Exists", "Unique"):
            return n.parent
        return n

    # -- conversion to and from mvdXML rule trees ----------------------------------

    def attribute_rules(self, node: Optional[TNode] = None) -> list:
        node = node or self.root
        groups = {}
        for (attr, _), ch in node.children.items():
            groups.setdefault(attr, []).append(ch)
        out = []
        for attr, kids in groups.items():
            ar = AttributeRule(attr)
            for ch in kids:
                ar.entity_rules.append(EntityRule(ch.type, ch.rule_id, self.attribute_rules(ch)))
            out.append(ar)
        return out

    def to_concept_template(self, uuid_: str, name: str, schema_id: str) -> ConceptTemplate:
        return ConceptTemplate(uuid_, name, schema_id, self.root.type, self.attribute_rules())

    @classmethod
    def from_concept_template(cls, t: ConceptTemplate, doc: Optional[MvdXmlDoc] = None) -> "Template":
        tpl = cls(t.applicable_entity)

        def register(rid, node, prefix):
            full = prefix + rid
            if full in tpl.by_id and tpl.by_id[full] is not node:
                raise MvdXmlError(f"duplicate RuleID {full!r} in template {t.name or t.uuid}")
            node.rule_id = full
            tpl.by_id[full] = node

        def add(node, rules, prefix, depth):
            if depth > 64:
                raise MvdXmlError("template references nest too deeply (cycle?)")
            for ar in rules:
                if ar.rule_id:
                    register(ar.rule_id, node.child(ar.attribute_name, None), prefix)
                for er in ar.entity_rules:
                    ch = node.child(ar.attribute_name, er.entity_name)
                    if er.rule_id:
                        register(er.rule_id, ch, prefix)
                    add(ch, er.attribute_rules, prefix, depth + 1)
                    for ref, p in er.references:
                        if doc is None:
                            raise MvdXmlError("template references need the enclosing document")
                        add(ch, doc.template(ref).rules, prefix + (p or ""), depth + 1)

        add(tpl.root, t.rules, "", 0)
        return tpl
