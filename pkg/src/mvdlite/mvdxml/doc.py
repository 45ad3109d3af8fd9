"""mvdXML V1.1 document objects and their XML (de)serialization."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Union

from ..errors import MvdXmlError

NAMESPACE = "http://buildingsmart-tech.org/mvd/XML/1.1"
MARKER_PREFIX = "mvdlite:"


@dataclass
class EntityRule:
    entity_name: str
    rule_id: Optional[str] = None
    attribute_rules: list = field(default_factory=list)
    references: list = field(default_factory=list)   # [(template uuid, id prefix)]


@dataclass
class AttributeRule:
    attribute_name: str
    rule_id: Optional[str] = None
    entity_rules: list = field(default_factory=list)


@dataclass
class ConceptTemplate:
    uuid: str
    name: str
    applicable_schema: str
    applicable_entity: str
    rules: list = field(default_factory=list)          # AttributeRule
    sub_templates: list = field(default_factory=list)  # ConceptTemplate


@dataclass
class TemplateRule:
    parameters: str
    description: Optional[str] = None


@dataclass
class TemplateRules:
    operator: str
    items: list = field(default_factory=list)    # TemplateRule | TemplateRules


RuleTree = Union[TemplateRule, TemplateRules]


@dataclass
class Requirement:
    exchange_requirement: str
    requirement: str = "mandatory"
    applicability: str = "export"


@dataclass
class Concept:
    uuid: str
    name: str
    template: str
    requirements: list = field(default_factory=list)
    rules: Optional[TemplateRules] = None
    definition: Optional[str] = None
    markers: list = field(default_factory=list)  # MVDLite text of rules with no mvdXML form


@dataclass
class Applicability:
    template: str
    rules: Optional[TemplateRules] = None
    uuid: Optional[str] = None


@dataclass
class ConceptRoot:
    uuid: str
    name: str
    applicable_root_entity: str
    applicability: Optional[Applicability] = None
    concepts: list = field(default_factory=list)
    definition: Optional[str] = None


@dataclass
class ExchangeRequirement:
    uuid: str
    name: str
    applicability: str = "export"


@dataclass
class ModelView:
    uuid: str
    name: str
    applicable_schema: str
    exchange_requirements: list = field(default_factory=list)
    roots: list = field(default_factory=list)


@dataclass
class MvdXmlDoc:
    uuid: str
    name: str
    templates: list = field(default_factory=list)
    views: list = field(default_factory=list)

    def template(self, uuid: str) -> ConceptTemplate:
        def find(ts):
            for t in ts:
                if t.uuid == uuid:
                    return t
                hit = find(t.sub_templates)
                if hit is not None:
                    return hit
            return None
        hit = find(self.templates)
        if hit is None:
            raise MvdXmlError(f"unknown template reference {uuid}")
        return hit

    def exchange_requirement(self, uuid: str) -> Optional[ExchangeRequirement]:
        for v in self.views:
            for er in v.exchange_requirements:
                if er.uuid == uuid:
                    return er
        return None


# -- markers -------------------------------------------------------------------

def encode_marker(text: str) -> str:
    """Comment body for a rule kept as MVDLite text (XML comments forbid ``--``)."""
    body = text.replace("%", "%25").replace("--", "-%2D").replace("--", "-%2D")
    return f" {MARKER_PREFIX} {body} "


def decode_marker(comment: str) -> Optional[str]:
    s = comment.strip()
    if not s.startswith(MARKER_PREFIX):
        return None
    body = s[len(MARKER_PREFIX):].strip()
    return body.replace("-%2D", "--").replace("%25", "%")


# -- reading --------------------------------------------------------------------

def _local(tag) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _children(el, name):
    return [c for c in el if _local(c.tag) == name]


def _child(el, name):
    for c in el:
        if _local(c.tag) == name:
            return c
    return None


def _attr(el, name, default=None, required=False):
    for k, v in el.attrib.items():
        if _local(k) == name:
            return v
    if required:
        raise MvdXmlError(f"<{_local(el.tag)}> lacks required attribute {name}")
    return default


def _definition(el) -> Optional[str]:
    defs = _child(el, "Definitions")
    if defs is None:
        return None
    for d in _children(defs, "Definition"):
        body = _child(d, "Body")
        if body is not None and body.text:
            return body.text
    return None


def _read_attribute_rule(el) -> AttributeRule:
    ar = AttributeRule(_attr(el, "AttributeName", required=True), _attr(el, "RuleID"))
    ers = _child(el, "EntityRules")
    if ers is not None:
        ar.entity_rules = [_read_entity_rule(e) for e in _children(ers, "EntityRule")]
    return ar


def _read_entity_rule(el) -> EntityRule:
    er = EntityRule(_attr(el, "EntityName", required=True), _attr(el, "RuleID"))
    ars = _child(el, "AttributeRules")
    if ars is not None:
        er.attribute_rules = [_read_attribute_rule(a) for a in _children(ars, "AttributeRule")]
    refs = _child(el, "References")
    if refs is not None:
        prefix = _attr(refs, "IdPrefix", "")
        for t in _children(refs, "Template"):
            er.references.append((_attr(t, "ref", required=True), prefix))
    return er


def _read_template(el) -> ConceptTemplate:
    t = ConceptTemplate(_attr(el, "uuid", required=True), _attr(el, "name", ""),
                        _attr(el, "applicableSchema", ""), _attr(el, "applicableEntity", required=True))
    rules = _child(el, "Rules")
    if rules is not None:
        t.rules = [_read_attribute_rule(a) for a in _children(rules, "AttributeRule")]
    subs = _child(el, "SubTemplates")
    if subs is not None:
        t.sub_templates = [_read_template(s) for s in _children(subs, "ConceptTemplate")]
    return t


def _read_rules(el) -> TemplateRules:
    op = (_attr(el, "operator", "and") or "and").lower()
    items = []
    for c in el:
        name = _local(c.tag)
        if name == "TemplateRule":
            items.append(TemplateRule(_attr(c, "Parameters", required=True), _attr(c, "Description")))
        elif name == "TemplateRules":
            items.append(_read_rules(c))
    return TemplateRules(op, items)


def _template_ref(el) -> str:
    t = _child(el, "Template")
    if t is None:
        raise MvdXmlError(f"<{_local(el.tag)}> has no <Template ref=...>")
    return _attr(t, "ref", required=True)


def _read_concept(el) -> Concept:
    c = Concept(_attr(el, "uuid", required=True), _attr(el, "name", ""), _template_ref(el))
    reqs = _child(el, "Requirements")
    if reqs is not None:
        for r in _children(reqs, "Requirement"):
            c.requirements.append(Requirement(_attr(r, "exchangeRequirement", required=True),
                                              _attr(r, "requirement", "mandatory"),
                                              _attr(r, "applicability", "export")))
    rules = _child(el, "TemplateRules")
    if rules is not None:
        c.rules = _read_rules(rules)
    c.definition = _definition(el)
    for node in el:
        if node.tag is ET.Comment:
            text = decode_marker(node.text or "")
            if text is not None:
                c.markers.append(text)
    return c


def _read_root(el) -> ConceptRoot:
    root = ConceptRoot(_attr(el, "uuid", required=True), _attr(el, "name", ""),
                       _attr(el, "applicableRootEntity", required=True))
    app = _child(el, "Applicability")
    if app is not None:
        rules = _child(app, "TemplateRules")
        root.applicability = Applicability(_template_ref(app), _read_rules(rules) if rules is not None else None,
                                           _attr(app, "uuid"))
    concepts = _child(el, "Concepts")
    if concepts is not None:
        root.concepts = [_read_concept(c) for c in _children(concepts, "Concept")]
    root.definition = _definition(el)
    return root


def parse_mvdxml(text: Union[str, bytes]) -> MvdXmlDoc:
    """Parse an mvdXML V1.1 document (namespace prefixes are ignored)."""
    parser = ET.XMLParser(target=ET.TreeBuilder(insert_comments=True))
    try:
        parser.feed(text)
        root = parser.close()
    except ET.ParseError as exc:
        raise MvdXmlError(f"malformed XML: {exc}") from None
    if _local(root.tag) != "mvdXML":
        raise MvdXmlError(f"root element is <{_local(root.tag)}>, expected <mvdXML>")
    doc = MvdXmlDoc(_attr(root, "uuid", ""), _attr(root, "name", ""))
    templates = _child(root, "Templates")
    if templates is not None:
        doc.templates = [_read_template(t) for t in _children(templates, "ConceptTemplate")]
    views = _child(root, "Views")
    if views is not None:
        for v in _children(views, "ModelView"):
            mv = ModelView(_attr(v, "uuid", required=True), _attr(v, "name", ""), _attr(v, "applicableSchema", ""))
            ers = _child(v, "ExchangeRequirements")
            if ers is not None:
                mv.exchange_requirements = [
                    ExchangeRequirement(_attr(e, "uuid", required=True), _attr(e, "name", ""),
                                        _attr(e, "applicability", "export"))
                    for e in _children(ers, "ExchangeRequirement")]
            roots = _child(v, "Roots")
            if roots is not None:
                mv.roots = [_read_root(r) for r in _children(roots, "ConceptRoot")]
            doc.views.append(mv)
    return doc


# -- writing ---------------------------------------------------------------------

def _sub(parent_el, tag_name, **attrs):
    el = ET.SubElement(parent_el, tag_name)
    for k, v in attrs.items():
        if v is not None:
            el.set(k, v)
    return el


def _write_definition(parent, text: Optional[str]):
    if text:
        body = _sub(_sub(_sub(parent, "Definitions"), "Definition"), "Body")
        body.text = text


def _write_attribute_rule(parent, ar: AttributeRule):
    el = _sub(parent, "AttributeRule", AttributeName=ar.attribute_name, RuleID=ar.rule_id)
    if ar.entity_rules:
        ers = _sub(el, "EntityRules")
        for er in ar.entity_rules:
            _write_entity_rule(ers, er)


def _write_entity_rule(parent, er: EntityRule):
    el = _sub(parent, "EntityRule", EntityName=er.entity_name, RuleID=er.rule_id)
    if er.attribute_rules:
        ars = _sub(el, "AttributeRules")
        for ar in er.attribute_rules:
            _write_attribute_rule(ars, ar)
    for ref, prefix in er.references:
        refs = _sub(el, "References", IdPrefix=prefix or None)
        _sub(refs, "Template", ref=ref)


def _write_template(parent, t: ConceptTemplate):
    el = _sub(parent, "ConceptTemplate", uuid=t.uuid, name=t.name, status="sample",
              applicableSchema=t.applicable_schema, applicableEntity=t.applicable_entity)
    if t.sub_templates:
        subs = _sub(el, "SubTemplates")
        for s in t.sub_templates:
            _write_template(subs, s)
    if t.rules:
        rules = _sub(el, "Rules")
        for ar in t.rules:
            _write_attribute_rule(rules, ar)


def _write_rules(parent, rules: TemplateRules):
    el = _sub(parent, "TemplateRules", operator=rules.operator)
    for item in rules.items:
        if isinstance(item, TemplateRules):
            _write_rules(el, item)
        else:
            _sub(el, "TemplateRule", Parameters=item.parameters, Description=item.description)


def to_element(doc: MvdXmlDoc) -> ET.Element:
    root = ET.Element("mvdXML", {"xmlns": NAMESPACE, "uuid": doc.uuid, "name": doc.name, "status": "sample"})
    templates = _sub(root, "Templates")
    for t in doc.templates:
        _write_template(templates, t)
    views = _sub(root, "Views")
    for v in doc.views:
        mv = _sub(views, "ModelView", uuid=v.uuid, name=v.name, applicableSchema=v.applicable_schema)
        ers = _sub(mv, "ExchangeRequirements")
        for er in v.exchange_requirements:
            _sub(ers, "ExchangeRequirement", uuid=er.uuid, name=er.name, applicability=er.applicability)
        roots = _sub(mv, "Roots")
        for cr in v.roots:
            el = _sub(roots, "ConceptRoot", uuid=cr.uuid, name=cr.name, applicableRootEntity=cr.applicable_root_entity)
            _write_definition(el, cr.definition)
            if cr.applicability is not None:
                app = _sub(el, "Applicability", uuid=cr.applicability.uuid)
                _sub(app, "Template", ref=cr.applicability.template)
                if cr.applicability.rules is not None:
                    _write_rules(app, cr.applicability.rules)
            if cr.concepts:
                concepts = _sub(el, "Concepts")
                for c in cr.concepts:
                    cel = _sub(concepts, "Concept", uuid=c.uuid, name=c.name)
                    _write_definition(cel, c.definition)
                    for m in c.markers:
                        cel.append(ET.Comment(encode_marker(m)))
                    _sub(cel, "Template", ref=c.template)
                    if c.requirements:
                        reqs = _sub(cel, "Requirements")
                        for r in c.requirements:
                            _sub(reqs, "Requirement", applicability=r.applicability, requirement=r.requirement,
                                 exchangeRequirement=r.exchange_requirement)
                    if c.rules is not None:
                        _write_rules(cel, c.rules)
    return root


def write_mvdxml(doc: MvdXmlDoc) -> str:
    """Serialize with one element per line."""
    el = to_element(doc)
    ET.indent(el, space="  ")
    return '<?xml version="1.0" encoding="utf-8"?>\n' + ET.tostring(el, encoding="unicode") + "\n"
