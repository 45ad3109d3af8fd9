import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvdlite import synth
from mvdlite.engine import validate
from mvdlite.engine.oracle import oracle_doc, oracle_validate
from mvdlite.errors import InexpressibleError, MvdXmlError
from mvdlite.ifc import get_schema
from mvdlite.lang import ast as A
from mvdlite.lang import format, parse
from mvdlite.mvdxml import from_mvdxml, parse_mvdxml, parse_statement, to_mvdxml, write_mvdxml
from mvdlite.mvdxml.doc import TemplateRule, TemplateRules, decode_marker, encode_marker
from mvdlite.mvdxml.statement import Leaf, SAnd, SNot, SOr, SXor, format_statement

from conftest import fixture_text

# -- statements ----------------------------------------------------------------------------


def test_parse_statement_precedence():
    s = parse_statement("A[Value]='x' OR B[Size]>1 AND NOT C[Exists]=TRUE XOR D=1")
    a = Leaf("A", "Value", "=", A.String("x"))
    b = Leaf("B", "Size", ">", A.Number(1))
    c = Leaf("C", "Exists", "=", A.Bool(True))
    d = Leaf("D", "Value", "=", A.Number(1))
    assert s == SOr((a, SXor((SAnd((b, SNot(c))), d))))


def test_parse_statement_values():
    assert parse_statement("T[Type]='IfcWall'") == Leaf("T", "Type", "=", A.TypeName("IfcWall"))
    assert parse_statement("T[type]=IfcWall") == Leaf("T", "Type", "=", A.TypeName("IfcWall"))
    assert parse_statement("E[Value]=.notdefined.") == Leaf("E", "Value", "=", A.Enum("NOTDEFINED"))
    assert parse_statement("(X[Value]!=-2.5)") == Leaf("X", "Value", "!=", A.Number(-2.5))


@pytest.mark.parametrize("text", ["", "A[Value]=", "A[Value]=1 B", "A[Bogus]=1", "A[Value]=Other", "AND[Value]=1",
                                  "(A[Value]=1", "A[Value]='x"])
def test_parse_statement_errors(text):
    with pytest.raises(MvdXmlError):
        parse_statement(text)


_literal = st.one_of(st.text(alphabet="abcXYZ _'", max_size=5).map(A.String), st.integers(-9, 9).map(A.Number),
                     st.booleans().map(A.Bool), st.sampled_from(["IFCWALL", "X_1"]).map(A.Enum))
_leaf = st.builds(Leaf, st.sampled_from(["Name", "Name_2", "NominalValue", "R"]),
                  st.sampled_from(["Value", "Size", "Exists", "Unique"]), st.sampled_from(A.COMPARATORS), _literal)
statements = st.recursive(_leaf, lambda c: st.one_of(
    c.map(SNot),
    st.lists(c, min_size=2, max_size=3).map(lambda xs: SAnd(tuple(xs))),
    st.lists(c, min_size=2, max_size=3).map(lambda xs: SOr(tuple(xs))),
    st.lists(c, min_size=2, max_size=3).map(lambda xs: SXor(tuple(xs))),
), max_leaves=6)


@settings(max_examples=300, deadline=None)
@given(statements)
def test_statement_format_round_trip(s):
    assert parse_statement(format_statement(s)) == s


@settings(max_examples=200, deadline=None)
# marker bodies are trimmed rule text
@given(st.text(max_size=30).map(str.strip))
def test_marker_round_trip(text):
    body = encode_marker(text)
    assert "--" not in body
    assert decode_marker(body) == text


# -- export --------------------------------------------------------------------------------


def test_export_fix_rules(ifc4):
    doc = to_mvdxml(parse(fixture_text("fix_rules.mvdlite")), ifc4)
    (view,) = doc.views
    assert [r.name for r in view.roots] == ["ExternalWall", "IfcProject"]
    concept = view.roots[0].concepts[0]
    assert concept.name == "IsExternal"
    assert concept.rules.items[0].parameters == (
        "Name[Value]='Pset_WallCommon' AND Name_2[Value]='IsExternal' AND NominalValue[Value]=TRUE")
    assert view.roots[1].concepts[0].markers == ["[Size]=1"]


def test_export_strict_rejects_global_metric(ifc4):
    with pytest.raises(InexpressibleError):
        to_mvdxml(parse(fixture_text("fix_rules.mvdlite")), ifc4, strict=True)


@pytest.mark.parametrize("rule", [
    "IfcWall ->IsDefinedBy(NOT ->RelatingPropertyDefinition)->Name='x';",
    "IfcWall ->IsDefinedBy->RelatingPropertyDefinition(NOT ->HasProperties->Name='a');",
    "IfcWall ->IsDefinedBy->RelatingPropertyDefinition(->HasProperties->Name='a' AND ->HasProperties->Name='b');",
    "IfcWall[Size]>=1;",
])
def test_export_strict_rejects_path_connectives(ifc4, rule):
    with pytest.raises(InexpressibleError):
        to_mvdxml(parse(rule), ifc4, strict=True)
    lenient = to_mvdxml(parse(rule), ifc4)
    assert lenient.views[0].roots[0].concepts[0].markers


def test_export_is_deterministic(ifc4):
    text = synth.random_ruleset(3, 20)
    assert write_mvdxml(to_mvdxml(parse(text), ifc4)) == write_mvdxml(to_mvdxml(parse(text), ifc4))


def _check_no_duplicate_attributes(elem):
    for rules in elem.iter("{*}AttributeRules"):
        names = [a.get("AttributeName") for a in rules.findall("{*}AttributeRule")]
        assert len(names) == len(set(names))
    for tpl in elem.iter("{*}ConceptTemplate"):
        rules = tpl.find("{*}Rules")
        if rules is not None:
            names = [a.get("AttributeName") for a in rules.findall("{*}AttributeRule")]
            assert len(names) == len(set(names))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_templates_well_formed(seed):
    xml = write_mvdxml(to_mvdxml(parse(synth.random_ruleset(seed, 20, concepts=0.3)), get_schema("IFC4")))
    root = ET.fromstring(xml)
    _check_no_duplicate_attributes(root)
    ids = [e.get("RuleID") for e in root.iter() if e.get("RuleID")]
    # RuleIDs are unique within each template
    for tpl in root.iter("{*}ConceptTemplate"):
        local = [e.get("RuleID") for e in tpl.iter() if e.get("RuleID")]
        assert len(local) == len(set(local))
    assert ids


def test_write_parse_document_round_trip(ifc4):
    doc = to_mvdxml(parse(fixture_text("fix_rules.mvdlite")), ifc4)
    text = write_mvdxml(doc)
    assert write_mvdxml(parse_mvdxml(text)) == text


def test_parse_mvdxml_rejects_garbage():
    with pytest.raises(MvdXmlError):
        parse_mvdxml("<notmvd/>")
    with pytest.raises(MvdXmlError):
        parse_mvdxml("<mvdXML")


# -- import --------------------------------------------------------------------------------


def test_import_branches_at_common_ancestor(ifc4):
    doc = to_mvdxml(parse(fixture_text("fix_rules.mvdlite")), ifc4)
    back = from_mvdxml(parse_mvdxml(write_mvdxml(doc)), ifc4)
    expr = back.concept("ExternalWall").constraint_rules[0].expr
    # the set name and the property branch share RelatingPropertyDefinition as their branch point
    assert [type(s).__name__ for s in expr.segments] == ["Attribute", "Attribute", "Compound"]
    assert expr.segments[1].name == "RelatingPropertyDefinition"
    inner = expr.segments[2].expr
    assert isinstance(inner, A.And) and len(inner.operands) == 2
    assert back.rules[0].rule.expr == A.Chain((A.Metric("Size", "=", (A.Number(1),)),))


OPERATOR_CASES = {
    "and": set(), "or": {2, 3}, "xor": {2, 3}, "nand": {2, 3}, "nor": set(), "nxor": set(),
}


@pytest.mark.parametrize("operator", sorted(OPERATOR_CASES))
def test_template_rule_operators(fix_a, ifc4, operator):
    doc = to_mvdxml(parse("IfcWall ->Name='W1';"), ifc4)
    concept = doc.views[0].roots[0].concepts[0]
    concept.rules = TemplateRules(operator, [TemplateRule("Name[Value]='W1'"), TemplateRule("Name[Value]='W2'")])
    doc = parse_mvdxml(write_mvdxml(doc))
    expected = {r: ("pass" if r in OPERATOR_CASES[operator] else "fail") for r in (2, 3)}
    assert oracle_doc(fix_a, ifc4, doc) == {("IfcWall", "IfcWall#r1"): expected}
    ast = from_mvdxml(doc, ifc4)
    assert validate(fix_a, ifc4, ast).verdict_map() == {("IfcWall", "IfcWall#r1"): expected}


def test_applicability_becomes_definition(fix_a, ifc4):
    text = ("concept Ext extends IfcWall { definition: ->IsDefinedBy->RelatingPropertyDefinition->HasProperties"
            "('IsExternal')->NominalValue=TRUE; constraint: ->Name='W1'; }")
    doc = parse_mvdxml(write_mvdxml(to_mvdxml(parse(text), ifc4)))
    back = from_mvdxml(doc, ifc4)
    assert len(back.concept("Ext").definition_rules) == 1
    assert validate(fix_a, ifc4, back).concepts == {"Ext": [2]}


# -- verdict preservation ------------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip_preserves_verdicts(seed):
    m = synth.random_model(seed, max_instances=250)
    ast = parse(synth.random_ruleset(seed, 15, concepts=0.3))
    ref = validate(m, None, ast).verdict_map()
    assert oracle_validate(m, None, ast) == ref
    doc = parse_mvdxml(write_mvdxml(to_mvdxml(ast, m.schema)))
    back = from_mvdxml(doc, m.schema)
    assert validate(m, None, back).verdict_map() == ref
    assert oracle_doc(m, m.schema, doc) == ref
    # and the other direction: the imported text re-exports to the same verdicts
    again = parse_mvdxml(write_mvdxml(to_mvdxml(parse(format(back)), m.schema)))
    assert oracle_doc(m, m.schema, again) == ref
