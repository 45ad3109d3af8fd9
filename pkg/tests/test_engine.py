from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvdlite import synth
from mvdlite.engine import (EdgeRelation, Evaluator, PrefixCache, Trace, eval_attribute, eval_chain,
                            eval_collection_metric, eval_compound, eval_single_metric, resolve_concepts, validate)
from mvdlite.engine.oracle import oracle_validate
from mvdlite.ifc import Typed, ValueNode, get_schema
from mvdlite.lang import ast as A
from mvdlite.lang import parse, resolve

from conftest import fixture_text

IS_EXTERNAL = ("->IsDefinedBy->RelatingPropertyDefinition('Pset_WallCommon')"
               "->HasProperties('IsExternal')->NominalValue=TRUE")


def expr_of(text: str, schema, root: str = "IfcWall"):
    """The resolved expression of a single top rule ``root text;``."""
    return resolve(parse(f"{root} {text};"), schema).rules[0].rule.expr


def walls(fix_a):
    return EdgeRelation.identity(fix_a.instances_of("IfcWall"))


# -- single operations ---------------------------------------------------------------------


def test_eval_attribute_fix_a(fix_a, ifc4):
    rel = eval_attribute(walls(fix_a), A.Attribute("IsDefinedBy", "IfcRelDefinesByProperties"), fix_a, ifc4)
    assert rel.pairs == {(2, 5), (3, 8)}
    assert rel.target_set == {5, 8}


def test_eval_attribute_empty_input(fix_a, ifc4):
    rel = eval_attribute(EdgeRelation.identity([]), A.Attribute("IsDefinedBy"), fix_a, ifc4)
    assert rel.pairs == frozenset() and not rel.target_set


def test_eval_attribute_fans_out_per_member():
    b = synth.ModelBuilder(get_schema("IFC4"))
    props = [b.add("IfcPropertySingleValue", Name=f"P{i}") for i in range(5)]
    pset = b.add("IfcPropertySet", GlobalId="0YvctVUKr0kugbFTf53O9L", HasProperties=tuple(props))
    m = b.model()
    rel = eval_attribute(EdgeRelation.identity([int(pset)]), A.Attribute("HasProperties"), m)
    assert len(rel.pairs) == 5 and {s for s, _ in rel.pairs} == {int(pset)}


def _values_model(values):
    b = synth.ModelBuilder(get_schema("IFC4"))
    ids = [b.add("IfcPropertySingleValue", Name=f"P{i}", NominalValue=Typed("IFCREAL", float(v)))
           for i, v in enumerate(values)]
    return b.model(), [int(i) for i in ids]


def test_eval_single_metric_value_filter():
    m, ids = _values_model([-1, 0, 2])
    rel = eval_attribute(EdgeRelation.identity(ids), A.Attribute("NominalValue"), m)
    out = eval_single_metric(rel, A.Metric("Value", ">=", (A.Number(0),)), m)
    assert sorted(n.owner for n in out.target_set) == ids[1:]
    assert {s for s, _ in out.pairs} == set(ids[1:])


def test_eval_single_metric_is_external(fix_a, ifc4):
    rel = eval_attribute(EdgeRelation.identity([6, 7]), A.Attribute("NominalValue"), fix_a, ifc4)
    out = eval_single_metric(rel, A.Metric("Value", "=", (A.Bool(True),)), fix_a)
    assert [n.owner for n in out.target_set] == [6]


def test_eval_single_metric_type_identity(fix_a):
    rel = walls(fix_a)
    assert eval_single_metric(rel, A.Metric("Type", "=", (A.TypeName("IfcWall"),)), fix_a) == rel


def test_eval_single_metric_rejects_collection_kind(fix_a):
    with pytest.raises(ValueError):
        eval_single_metric(walls(fix_a), A.Metric("Size", "=", (A.Number(1),)), fix_a)


def test_eval_collection_metric(fix_a, ifc4):
    psets = EdgeRelation.identity([4, 9])
    hp = A.Attribute("HasProperties")
    assert eval_collection_metric(psets, hp, A.Metric("Size", "=", (A.Number(1),)), fix_a, ifc4).target_set == {4, 9}
    assert not eval_collection_metric(psets, hp, A.Metric("Size", ">", (A.Number(1),)), fix_a, ifc4).target_set
    # an empty collection fails existence
    proj = EdgeRelation.identity([1])
    out = eval_collection_metric(proj, A.Attribute("IsDecomposedBy"), A.Metric("Exists", "=", (A.Bool(True),)),
                                 fix_a, ifc4)
    assert not out.target_set


def test_eval_compound_name_sugar(fix_a, ifc4):
    rel = walls(fix_a)
    for name in ("IsDefinedBy", "RelatingPropertyDefinition", "HasProperties"):
        rel = eval_attribute(rel, A.Attribute(name), fix_a, ifc4)
    comp = resolve(parse("IfcPropertySingleValue ('IsExternal');"), ifc4).rules[0].rule.expr.segments[0]
    assert isinstance(comp, A.Compound)
    out = eval_compound(rel, comp, fix_a, ifc4)
    assert out.target_set == {6, 7}
    other = A.Compound(A.Chain((A.Attribute("Name"), A.Metric("Value", "=", (A.String("Width"),)))))
    assert not eval_compound(rel, other, fix_a, ifc4).target_set


def test_eval_compound_idempotent_and(fix_a, ifc4):
    a = expr_of(IS_EXTERNAL, ifc4)
    single = eval_compound(walls(fix_a), A.Compound(a), fix_a, ifc4)
    both = eval_compound(walls(fix_a), A.Compound(A.And((a, a))), fix_a, ifc4)
    assert single == both
    assert single.target_set == {2}


def test_eval_compound_or_of_disjoint_filters(fix_a, ifc4):
    x = expr_of("->Name='W1'", ifc4)
    y = expr_of("->Name='W2'", ifc4)
    out = eval_compound(walls(fix_a), A.Compound(A.Or((x, y))), fix_a, ifc4)
    assert out.target_set == {2, 3}


def test_eval_chain_examples(fix_a, ifc4):
    assert eval_chain([2, 3], expr_of(IS_EXTERNAL, ifc4), fix_a, ifc4) == [2]
    assert eval_chain([2, 3], A.Chain(()), fix_a, ifc4) == [2, 3]
    assert eval_chain([2, 3], expr_of("->Decomposes", ifc4), fix_a, ifc4) == []


def test_eval_chain_with_shared_cache(fix_a, ifc4):
    cache = PrefixCache()
    expr = expr_of(IS_EXTERNAL, ifc4)
    first = eval_chain([2, 3], expr, fix_a, ifc4, cache=cache, key="IfcWall")
    assert len(cache) > 0
    misses = cache.misses
    assert eval_chain([2, 3], expr, fix_a, ifc4, cache=cache, key="IfcWall") == first
    assert cache.misses == misses and cache.hits > 0


# -- concepts and validation ---------------------------------------------------------------


def test_resolve_concepts(fix_a, ifc4):
    text = f"""
    concept ExternalWall extends IfcWall {{ definition: {IS_EXTERNAL}; }}
    concept AnyWall extends IfcWall {{ constraint: ->Name[Exists]=TRUE; }}
    concept Named extends ExternalWall {{ definition: ->Name='W1'; }}
    """
    u = resolve_concepts(resolve(parse(text), ifc4), fix_a, ifc4)
    assert u["ExternalWall"] == {2}
    assert u["AnyWall"] == {2, 3}
    assert u["Named"] <= u["ExternalWall"]


def test_validate_fix_a(fix_a):
    r = validate(fix_a, None, parse(fixture_text("fix_rules.mvdlite")))
    assert r.verdict_map() == {("ExternalWall", "IsExternal"): {2: "pass", 3: "fail"},
                               ("IfcProject", "OneProject"): {None: "pass"}}
    assert not r.ok
    assert validate(fix_a, None, parse("IfcWall[Exists]=TRUE;")).verdict_map() == {
        ("IfcWall", "IfcWall#r1"): {None: "pass"}}


def test_validate_empty_ruleset(fix_a):
    r = validate(fix_a, None, parse(""))
    assert r.results == [] and r.ok


def test_recommended_failures_do_not_fail_the_report(fix_a):
    r = validate(fix_a, None, parse('// {"severity": "recommended"}\nIfcWall ->Name=\'W1\';'))
    assert r.results[0].failed == [3]
    assert r.ok


def test_report_formats(fix_a):
    import csv
    import io
    import json
    r = validate(fix_a, None, parse(fixture_text("fix_rules.mvdlite")), model_name="fix_a.ifc")
    d = json.loads(r.to_json())
    assert d["format_version"] == "1.0" and d["passed"] is False
    assert d["rules"][0]["summary"] == {"pass": 1, "fail": 1}
    rows = list(csv.DictReader(io.StringIO(r.to_csv())))
    assert {(row["rule"], row["root"], row["verdict"]) for row in rows} == {
        ("IsExternal", "#2", "pass"), ("IsExternal", "#3", "fail"), ("OneProject", "", "pass")}
    assert "failing: #3" in r.to_text()


def test_epsilon_tolerance():
    m, ids = _values_model([1.0000001])
    strict = validate(m, None, parse("IfcPropertySingleValue ->NominalValue=1.0;"))
    loose = validate(m, None, parse("IfcPropertySingleValue ->NominalValue=1.0;"), epsilon=1e-3)
    assert strict.results[0].failed == ids and loose.results[0].passed == ids


# -- properties over random models ---------------------------------------------------------

CORPUS = st.integers(0, 10_000)


def _case(seed, n_rules=12, concepts=0.3):
    return synth.random_model(seed, max_instances=250), parse(synth.random_ruleset(seed, n_rules, concepts=concepts))


@settings(max_examples=15, deadline=None)
@given(CORPUS)
def test_cache_and_prune_transparent(seed):
    m, ast = _case(seed)
    ref = validate(m, None, ast, cache=False, prune=False, threads=1).verdict_map()
    for cache in (True, False):
        for prune in (True, False):
            assert validate(m, None, ast, cache=cache, prune=prune, threads=2).verdict_map() == ref


@settings(max_examples=15, deadline=None)
@given(CORPUS)
def test_oracle_equivalence(seed):
    m, ast = _case(seed)
    assert validate(m, None, ast).verdict_map() == oracle_validate(m, None, ast)


class _CountingEvaluator(Evaluator):
    """Records forward expansions per (node, segment position) and backtrack lookups per (node, layer)."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.forward = Counter()
        self.backward = Counter()
        self.position = 0

    def _apply(self, layer, seg, key, tr):
        self.position += 1
        return super()._apply(layer, seg, key, tr)

    def targets(self, node, attr, allowed):
        self.forward[(node, self.position)] += 1
        return super().targets(node, attr, allowed)

    def backtrack(self, layer, tr):
        counter = self.backward
        cur = layer
        while cur.prev is not None:
            cur.adj = _CountingDict(cur.adj, counter, id(cur))
            cur = cur.prev
        return super().backtrack(layer, tr)


class _CountingDict(dict):
    def __init__(self, data, counter, tag):
        super().__init__(data)
        self.counter, self.tag = counter, tag

    def __getitem__(self, key):
        self.counter[(key, self.tag)] += 1
        return super().__getitem__(key)


@settings(max_examples=15, deadline=None)
@given(CORPUS)
def test_visit_bound(seed):
    m, ast = _case(seed, concepts=0)
    schema = m.schema
    ast = resolve(ast, schema)
    for t in ast.rules:
        expr = t.rule.expr
        if not isinstance(expr, A.Chain) or not expr.segments or isinstance(expr.segments[0], A.Metric):
            continue
        ev = _CountingEvaluator(m, schema, cache=False)
        ev.eval_filter(expr, set(m.instances_of(t.root)), None, Trace())
        assert all(v == 1 for v in ev.forward.values())
        assert all(v == 1 for v in ev.backward.values())


@settings(max_examples=30, deadline=None)
@given(CORPUS, st.lists(st.sampled_from([">=", "<=", "!=", ">"]), min_size=1, max_size=4),
       st.lists(st.integers(-5, 5), min_size=4, max_size=4))
def test_monotone_pruning(seed, ops, bounds):
    m = synth.random_model(seed, max_instances=250)
    props = m.instances_of("IfcPropertySingleValue")
    rel = eval_attribute(EdgeRelation.identity(props), A.Attribute("NominalValue"), m)
    prev = rel.target_set.to_set()
    for op, k in zip(ops, bounds):
        rel = eval_single_metric(rel, A.Metric("Value", op, (A.Number(k),)), m)
        cur = rel.target_set.to_set()
        assert cur <= prev
        assert all(isinstance(n, ValueNode) for n in cur)
        prev = cur


def test_inheritance_soundness():
    text = """
    concept Parent extends IfcWall {
      constraint:
        // {"name": "named"}
        ->Name='W1'|'W2'|'Basic Wall';
        // {"name": "typed"}
        ->IsDefinedBy->RelatingPropertyDefinition->HasProperties[Size]>=1;
    }
    concept Child extends Parent {
      definition: ->IsDefinedBy->RelatingPropertyDefinition->HasProperties('IsExternal')->NominalValue=TRUE;
    }
    concept Grandchild extends Child {
      definition: ->Name[Exists]=TRUE;
    }
    """
    for seed in range(8):
        m = synth.random_model(seed, max_instances=300)
        r = validate(m, None, parse(text))
        vm = r.verdict_map()
        for child in ("Child", "Grandchild"):
            members = set(r.concepts[child])
            assert members <= set(r.concepts["Parent"])
            for rule in ("named", "typed"):
                expected = {k: v for k, v in vm[("Parent", rule)].items() if k in members}
                assert vm[(child, rule)] == (expected or {None: "not_applicable"})


SET_LAWS = """
IfcWall ->Name='W1'|'W2';
IfcWall ->IsDefinedBy->RelatingPropertyDefinition->HasProperties[Size]>=2;
IfcWall ->Name='W1'|'W2' AND ->IsDefinedBy->RelatingPropertyDefinition->HasProperties[Size]>=2;
IfcWall ->Name='W1'|'W2' OR ->IsDefinedBy->RelatingPropertyDefinition->HasProperties[Size]>=2;
IfcWall ->Name='W1'|'W2' XOR ->IsDefinedBy->RelatingPropertyDefinition->HasProperties[Size]>=2;
IfcWall NOT ->Name='W1'|'W2';
"""


@pytest.mark.parametrize("seed", range(6))
def test_root_level_set_laws(seed):
    m = synth.random_model(seed, max_instances=300)
    r = validate(m, None, parse(SET_LAWS))
    p = {res.rule: set(res.passed) for res in r.results}
    universe = set(m.instances_of("IfcWall"))
    a, b = p["IfcWall#r1"], p["IfcWall#r2"]
    assert p["IfcWall#r3"] == a & b
    assert p["IfcWall#r4"] == a | b
    assert p["IfcWall#r5"] == a ^ b
    assert p["IfcWall#r6"] == universe - a
