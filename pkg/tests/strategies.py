"""Hypothesis strategies for MVDLite syntax trees and for sugar/plain rule pairs."""
from __future__ import annotations

from hypothesis import strategies as st

from mvdlite.lang import ast as A

IDENTS = ("Name", "HasProperties", "NominalValue", "IsDefinedBy", "RelatingPropertyDefinition",
          "IfcWall", "IfcPropertySingleValue", "typePset", "psets", "x", "Ab_1", "Wall")
TYPE_IDENTS = ("IfcWall", "IfcLabel", "IfcPropertySet", "IfcBoolean", "IfcReal")
ENUM_TOKENS = ("T", "F", "STANDARD", "NOTDEFINED", "U")
OPS = A.COMPARATORS

idents = st.sampled_from(IDENTS)
texts = st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126) | st.sampled_from("éß"),
                max_size=6)
numbers = st.one_of(
    st.integers(-10_000, 10_000),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
).map(A.Number)

_LITERALS = {
    "String": texts.map(A.String),
    "Number": numbers,
    "Bool": st.booleans().map(A.Bool),
    "TypeName": st.sampled_from(TYPE_IDENTS).map(A.TypeName),
    "Enum": st.sampled_from(ENUM_TOKENS).map(A.Enum),
}


@st.composite
def metrics(draw):
    kind = draw(st.sampled_from(list(_LITERALS)))
    values = tuple(draw(st.lists(_LITERALS[kind], min_size=1, max_size=3)))
    return A.Metric(draw(st.none() | st.sampled_from(A.METRIC_KINDS)), draw(st.sampled_from(OPS)), values)


attributes = st.builds(A.Attribute, idents, st.none() | st.sampled_from(TYPE_IDENTS))


def segments(refs=IDENTS):
    """Non-compound segments; abbreviation references draw their names from ``refs``."""
    options = [attributes, metrics()]
    if refs:
        options.append(st.sampled_from(refs).map(A.AbbrevRef))
    return st.one_of(*options)


@st.composite
def chains(draw, segment_strategy, min_size=1):
    # a bare name string can only open a chain
    lead = draw(st.none() | texts.map(A.NameSugar))
    rest = draw(st.lists(segment_strategy, min_size=0 if lead else min_size, max_size=4))
    return A.Chain(((lead,) if lead else ()) + tuple(rest))


def expressions(refs=IDENTS, max_leaves=8):
    simple = segments(refs)

    def extend(children):
        chain = chains(st.one_of(simple, children.map(A.Compound)))
        operands = st.lists(children, min_size=2, max_size=3)
        return st.one_of(
            chain,
            children.map(A.Not),
            operands.map(lambda o: A.And(tuple(o))),
            operands.map(lambda o: A.Or(tuple(o))),
            operands.map(lambda o: A.Xor(tuple(o))),
        )

    return st.recursive(chains(simple), extend, max_leaves=max_leaves)


exprs = expressions()

tags = st.none() | st.fixed_dictionaries(
    {"name": texts}, optional={"severity": st.sampled_from(["mandatory", "recommended"])})


@st.composite
def rulesets(draw, acyclic_refs: bool = False):
    """Whole documents.  With ``acyclic_refs`` every reference names an earlier abbreviation."""
    names = [f"ab{i}" for i in range(draw(st.integers(0, 3)))]
    header = []
    for i, n in enumerate(names):
        refs = tuple(names[:i]) if acyclic_refs else IDENTS
        header.append(A.AbbreviationDef(n, draw(st.none() | st.sampled_from(TYPE_IDENTS)),
                                        draw(chains(segments(refs))), draw(tags)))
    body_exprs = expressions(tuple(names) if acyclic_refs else IDENTS)
    rule_defs = st.builds(A.RuleDef, st.sampled_from([A.DEFINITION, A.CONSTRAINT]), body_exprs, tags)
    concepts = []
    for i in range(draw(st.integers(0, 2))):
        parent = draw(st.sampled_from(("IfcWall", "IfcDoor") + tuple(c.name for c in concepts)))
        concepts.append(A.ConceptDef(f"Concept{i}", parent, tuple(draw(st.lists(rule_defs, max_size=3))),
                                     draw(tags)))
    top = tuple(
        A.TopRule(draw(st.sampled_from(("IfcWall", "IfcProject", "IfcElement"))),
                  A.RuleDef(A.CONSTRAINT, draw(body_exprs | st.just(A.Chain(()))), draw(tags)))
        for _ in range(draw(st.integers(0, 3))))
    return A.RuleSetAst(tuple(header), tuple(concepts), top)


# -- sugar / plain pairs over the synthetic model vocabulary ----------------------------------------
#
# Each pair is (sugared rule, the same rule written without sugar by hand).
# The hand-written side spells out the meaning of the sugar directly:
# a name string is a Name filter, and ``=a|b`` at the end of a path is a
# disjunction of the whole path with each value.

PSETS = ("Pset_WallCommon", "Pset_DoorCommon", "Custom", "Identity", "Nope")
PROPS = ("IsExternal", "LoadBearing", "FireRating", "Reference", "Width")
LABELS = ("EI60", "EI90", "A", "x", "")
ELEMENT_NAMES = ("W1", "W2", "Door-A", "Slab", "Basic Wall", "zz")
ROOTS = ("IfcWall", "IfcDoor", "IfcElement", "IfcSlab")


def _q(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


_PROPS_PATH = "->IsDefinedBy->RelatingPropertyDefinition"


@st.composite
def pset_prefix(draw):
    """A path to property nodes, optionally filtered by set and property names."""
    pset = draw(st.none() | st.sampled_from(PSETS))
    prop = draw(st.none() | st.sampled_from(PROPS))
    sugar = _PROPS_PATH + (f"({_q(pset)})" if pset else "") + "->HasProperties" + (f"({_q(prop)})" if prop else "")
    plain = (_PROPS_PATH + (f"(->Name[Value]={_q(pset)})" if pset else "") + "->HasProperties"
             + (f"(->Name[Value]={_q(prop)})" if prop else ""))
    return sugar, plain


@st.composite
def value_tail(draw):
    """(prefix attribute, literal alternatives) for a final value comparison."""
    choice = draw(st.sampled_from(["bool", "label", "name"]))
    if choice == "bool":
        return "->NominalValue", draw(st.lists(st.sampled_from(["TRUE", "FALSE"]), min_size=1, max_size=2))
    if choice == "label":
        return "->NominalValue", draw(st.lists(st.sampled_from([_q(x) for x in LABELS]), min_size=1, max_size=3))
    return "->Name", draw(st.lists(st.sampled_from([_q(x) for x in PROPS]), min_size=1, max_size=3))


@st.composite
def sugar_pairs(draw):
    root = draw(st.sampled_from(ROOTS))
    form = draw(st.sampled_from(["value", "size", "name"]))
    if form == "name":
        name = draw(st.sampled_from(ELEMENT_NAMES))
        return f"{root} {_q(name)};", f"{root} ->Name[Value]={_q(name)};"
    sugar_pre, plain_pre = draw(pset_prefix())
    op = draw(st.sampled_from(["=", "!="]))
    if form == "size":
        values = draw(st.lists(st.integers(0, 3).map(str), min_size=1, max_size=3))
        sugar_pre, plain_pre = sugar_pre.rsplit("->HasProperties", 1)[0], plain_pre.rsplit("->HasProperties", 1)[0]
        sugar = f"{root} {sugar_pre}->HasProperties[Size]{op}{'|'.join(values)};"
        plain = f"{root} " + " OR ".join(f"{plain_pre}->HasProperties[Size]{op}{v}" for v in values) + ";"
        return sugar, plain
    attr, values = draw(value_tail())
    if attr == "->Name":
        sugar_pre = sugar_pre.rsplit("(", 1)[0] if sugar_pre.endswith(")") else sugar_pre
        plain_pre = plain_pre.rsplit("(", 1)[0] if plain_pre.endswith(")") else plain_pre
    sugar = f"{root} {sugar_pre}{attr}{op}{'|'.join(values)};"
    plain = f"{root} " + " OR ".join(f"{plain_pre}{attr}[Value]{op}{v}" for v in values) + ";"
    return sugar, plain
