"""Synthetic IFC models and rulesets for tests and benchmarks.

Everything is driven by a seeded :class:`random.Random`, so the same seed
always produces the same text.
"""
from __future__ import annotations

import random
from typing import Optional

from .errors import InexpressibleError, MvdLiteError
from .ifc.model import Model, parse_spf, write_records
from .ifc.schema import SchemaTable, get_schema
from .ifc.step import UNSET, EnumToken, Ref, Typed

_B64 = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$"

ELEMENT_TYPES = {
    "IfcWall": ("STANDARD", "SOLIDWALL", "PARTITIONING", "NOTDEFINED"),
    "IfcDoor": ("DOOR", "GATE", "NOTDEFINED"),
    "IfcWindow": ("WINDOW", "SKYLIGHT", "NOTDEFINED"),
    "IfcSlab": ("FLOOR", "ROOF", "BASESLAB", "NOTDEFINED"),
}
ELEMENT_NAMES = ("W1", "W2", "Door-A", "Door-B", "Slab", "Window 1", "Basic Wall", "")
PSET_NAMES = ("Pset_WallCommon", "Pset_DoorCommon", "Pset_SlabCommon", "Pset_WindowCommon", "Custom", "Identity")
PROP_NAMES = ("IsExternal", "LoadBearing", "FireRating", "Reference", "ThermalTransmittance", "Width")
QTO_NAMES = ("Qto_WallBaseQuantities", "Qto_Custom")
QUANTITY_NAMES = ("Length", "Height", "Width")
LABELS = ("EI60", "EI90", "A", "B", "x", "")
TYPE_NAMES = ("Basic Wall:Generic", "Basic Wall:Exterior", "Door Type")
STOREY_NAMES = ("Level 1", "Level 2", "Roof")


def global_id(rng: random.Random) -> str:
    return _B64[rng.randrange(4)] + "".join(rng.choice(_B64) for _ in range(21))


class ModelBuilder:
    """Collects records by attribute name and writes them in schema order."""

    def __init__(self, schema: SchemaTable):
        self.schema = schema
        self.records = []
        self._names = {}

    def add(self, entity: str, **attrs) -> Ref:
        ent = self.schema.entity(entity).name
        names = self._names.get(ent)
        if names is None:
            names = self._names[ent] = tuple(a.name for a in self.schema.effective_attributes(ent))
        unknown = set(attrs) - set(names)
        if unknown:
            raise ValueError(f"{ent} has no attribute(s) {sorted(unknown)}")
        iid = len(self.records) + 1
        self.records.append((iid, ent, tuple(attrs.get(n, UNSET) for n in names)))
        return Ref(iid)

    def __len__(self):
        return len(self.records)

    def header(self, name: str) -> dict:
        return {
            "file_description": (("ViewDefinition [CoordinationView]",), "2;1"),
            "file_name": (name, "2024-01-01T00:00:00", ("",), ("",), "mvdlite.synth", "", ""),
            "file_schema": ((self.schema.schema_id,),),
        }

    def text(self, name: str = "synthetic.ifc") -> str:
        return write_records(self.header(name), self.records)

    def model(self, name: str = "synthetic.ifc") -> Model:
        return parse_spf(self.text(name), self.schema, source=name)


def _value(rng: random.Random):
    r = rng.random()
    if r < 0.3:
        return Typed("IFCBOOLEAN", rng.random() < 0.5)
    if r < 0.55:
        return Typed("IFCLABEL", rng.choice(LABELS))
    if r < 0.75:
        return Typed("IFCREAL", rng.choice((0.0, 0.25, 0.5, 1.0, 2.5)))
    if r < 0.9:
        return Typed("IFCINTEGER", rng.randrange(-1, 4))
    if r < 0.95:
        return Typed("IFCLENGTHMEASURE", rng.choice((0.1, 0.2, 0.3)))
    return UNSET


def _build(b: ModelBuilder, rng: random.Random, n_elements: int, *, storeys: int = 2, types: int = 2,
           psets: tuple = (0, 3), props: tuple = (1, 4), share: float = 0.2, quantities: float = 0.3,
           geometry: Optional[callable] = None, max_instances: Optional[int] = None) -> list:
    proj = b.add("IfcProject", GlobalId=global_id(rng), Name="Synthetic")
    levels = [b.add("IfcBuildingStorey", GlobalId=global_id(rng), Name=STOREY_NAMES[i % len(STOREY_NAMES)],
                    Elevation=3.0 * i) for i in range(storeys)]
    if levels:
        b.add("IfcRelAggregates", GlobalId=global_id(rng), RelatingObject=proj, RelatedObjects=tuple(levels))

    made_psets = []

    def new_pset():
        ps = [b.add("IfcPropertySingleValue", Name=rng.choice(PROP_NAMES), NominalValue=_value(rng))
              for _ in range(rng.randint(*props))]
        p = b.add("IfcPropertySet", GlobalId=global_id(rng), Name=rng.choice(PSET_NAMES), HasProperties=tuple(ps))
        made_psets.append(p)
        return p

    type_objs = []
    for _ in range(types):
        hp = tuple(new_pset() for _ in range(rng.randint(0, 2)))
        type_objs.append(b.add("IfcWallType", GlobalId=global_id(rng), Name=rng.choice(TYPE_NAMES),
                               HasPropertySets=hp or UNSET, PredefinedType=EnumToken("STANDARD")))

    elements = []
    contained = {lv: [] for lv in levels}
    typed = {t: [] for t in type_objs}
    defined = {}
    for _ in range(n_elements):
        if max_instances is not None and len(b) >= max_instances:
            break
        ent = rng.choice(list(ELEMENT_TYPES))
        kw = {"GlobalId": global_id(rng), "PredefinedType": EnumToken(rng.choice(ELEMENT_TYPES[ent]))}
        if rng.random() < 0.9:
            kw["Name"] = rng.choice(ELEMENT_NAMES)
        if ent == "IfcDoor" and rng.random() < 0.8:
            kw["OverallHeight"] = rng.choice((2.0, 2.1, 2.4))
        if geometry is not None:
            kw.update(geometry(b, rng))
        e = b.add(ent, **kw)
        elements.append(e)
        if levels and rng.random() < 0.8:
            contained[rng.choice(levels)].append(e)
        if type_objs and rng.random() < 0.5:
            typed[rng.choice(type_objs)].append(e)
        for _ in range(rng.randint(*psets)):
            p = rng.choice(made_psets) if made_psets and rng.random() < share else new_pset()
            defined.setdefault(p, []).append(e)
        if rng.random() < quantities:
            qs = tuple(b.add("IfcQuantityLength", Name=rng.choice(QUANTITY_NAMES),
                             LengthValue=rng.choice((0.5, 1.0, 3.0))) for _ in range(rng.randint(1, 3)))
            q = b.add("IfcElementQuantity", GlobalId=global_id(rng), Name=rng.choice(QTO_NAMES), Quantities=qs)
            defined.setdefault(q, []).append(e)
    for lv, els in contained.items():
        if els:
            b.add("IfcRelContainedInSpatialStructure", GlobalId=global_id(rng), RelatedElements=tuple(els),
                  RelatingStructure=lv)
    for t, els in typed.items():
        if els:
            b.add("IfcRelDefinesByType", GlobalId=global_id(rng), RelatedObjects=tuple(els), RelatingType=t)
    for p, els in defined.items():
        b.add("IfcRelDefinesByProperties", GlobalId=global_id(rng), RelatedObjects=tuple(dict.fromkeys(els)),
              RelatingPropertyDefinition=p)
    return elements


def random_model(seed: int, max_instances: int = 500, schema: Optional[SchemaTable] = None) -> Model:
    """A small model with a random mix of elements, property sets, types and quantities."""
    n = random.Random(seed).randint(2, 30)
    while True:
        rng = random.Random(seed)
        b = ModelBuilder(schema or get_schema("IFC4"))
        _build(b, rng, n, storeys=rng.randint(0, 3), types=rng.randint(0, 3), psets=(0, rng.randint(1, 3)),
               props=(1, rng.randint(1, 4)), share=rng.random() * 0.5)
        if len(b) <= max_instances or n == 1:
            return b.model(f"random-{seed}.ifc")
        n //= 2


def benchmark_model(n_instances: int = 50_000, seed: int = 7, schema: Optional[SchemaTable] = None) -> str:
    """SPF text of a property-heavy model with about ``n_instances`` instances."""
    rng = random.Random(seed)
    b = ModelBuilder(schema or get_schema("IFC4"))
    # about 16 instances per element with these parameters
    _build(b, rng, n_instances, storeys=4, types=8, psets=(2, 4), props=(2, 5), share=0.1, quantities=0.5,
           max_instances=n_instances)
    return b.text(f"benchmark-{n_instances}.ifc")


def _geometry(points_per_element: int):
    def make(b: ModelBuilder, rng: random.Random) -> dict:
        origin = b.add("IfcCartesianPoint", Coordinates=(rng.uniform(0, 50), rng.uniform(0, 50), 0.0))
        placement = b.add("IfcLocalPlacement", RelativePlacement=b.add("IfcAxis2Placement3D", Location=origin))
        pts = tuple(b.add("IfcCartesianPoint", Coordinates=(round(rng.uniform(0, 10), 6), round(rng.uniform(0, 10), 6),
                                                             round(rng.uniform(0, 3), 6)))
                    for _ in range(points_per_element))
        items = []
        for i in range(0, len(pts), 8):
            loop = pts[i:i + 8]
            if len(loop) >= 3:
                items.append(b.add("IfcPolyLoop", Polygon=loop))
        rep = b.add("IfcShapeRepresentation", RepresentationIdentifier="Body", RepresentationType="Brep",
                    Items=tuple(items))
        return {"ObjectPlacement": placement,
                "Representation": b.add("IfcProductDefinitionShape", Representations=(rep,))}
    return make


def duplex_scale_model(target_lines: int = 860_000, seed: int = 11, schema: Optional[SchemaTable] = None) -> str:
    """SPF text shaped like a small building export: geometry makes up most lines."""
    rng = random.Random(seed)
    b = ModelBuilder(schema or get_schema("IFC4"))
    n_elements = max(1, target_lines // 430)
    _build(b, rng, n_elements, storeys=3, types=6, psets=(2, 5), props=(3, 8), share=0.1, quantities=0.7,
           geometry=_geometry(360), max_instances=target_lines)
    return b.text("duplex-scale.ifc")


def redundant_model(seed: int = 3, n_elements: int = 60, schema: Optional[SchemaTable] = None) -> str:
    """A model carrying content no rule looks at (geometry, quantities, unrelated psets)."""
    rng = random.Random(seed)
    b = ModelBuilder(schema or get_schema("IFC4"))
    _build(b, rng, n_elements, storeys=2, types=2, psets=(1, 3), props=(1, 4), share=0.2, quantities=0.6,
           geometry=_geometry(24))
    return b.text("redundant.ifc")


def typed_twins(seed: int = 5, n_walls: int = 12) -> dict:
    """The same typed walls in IFC2X3 and IFC4.

    The type link goes through IsDefinedBy in IFC2X3 and IsTypedBy in IFC4.
    Returns {schema id: SPF text}.
    """
    out = {}
    for sid in ("IFC2X3", "IFC4"):
        rng = random.Random(seed)
        schema = get_schema(sid)
        b = ModelBuilder(schema)
        owner = {}
        if sid == "IFC2X3":
            person = b.add("IfcPerson", FamilyName="Synth")
            org = b.add("IfcOrganization", Name="Synth")
            po = b.add("IfcPersonAndOrganization", ThePerson=person, TheOrganization=org)
            app = b.add("IfcApplication", ApplicationDeveloper=org, Version="1", ApplicationFullName="synth",
                        ApplicationIdentifier="synth")
            owner = {"OwnerHistory": b.add("IfcOwnerHistory", OwningUser=po, OwningApplication=app,
                                           ChangeAction=EnumToken("NOCHANGE"), CreationDate=0)}
        b.add("IfcProject", GlobalId=global_id(rng), Name="Twins", **owner)
        types = []
        for k in range(3):
            ps = tuple(b.add("IfcPropertySingleValue", Name=name, NominalValue=val)
                       for name, val in (("IsExternal", Typed("IFCBOOLEAN", k != 1)),
                                         ("FireRating", Typed("IFCLABEL", ("EI60", "EI90", "")[k]))))
            pset = b.add("IfcPropertySet", GlobalId=global_id(rng), Name="Pset_WallCommon", HasProperties=ps,
                         **owner)
            types.append(b.add("IfcWallType", GlobalId=global_id(rng), Name=f"Type {k}", HasPropertySets=(pset,),
                               PredefinedType=EnumToken("STANDARD"), **owner))
        groups = {t: [] for t in types}
        walls = []
        for i in range(n_walls):
            w = b.add("IfcWall", GlobalId=global_id(rng), Name=f"W{i}", **owner)
            walls.append(w)
            r = rng.random()
            if r < 0.85:
                groups[types[rng.randrange(3)]].append(w)
        for t, ws in groups.items():
            if ws:
                b.add("IfcRelDefinesByType", GlobalId=global_id(rng), RelatedObjects=tuple(ws), RelatingType=t,
                      **owner)
        out[sid] = b.text(f"twin-{sid}.ifc")
    return out


# -- rules -----------------------------------------------------------------------------

# node kind -> [(attribute, child kind)]
PATHS = {
    "element": [("Name", "label"), ("PredefinedType", "enum"), ("IsDefinedBy", "reldef"),
                ("IsTypedBy", "reltype"), ("ContainedInStructure", "relcont"), ("OverallHeight", "real")],
    "reldef": [("RelatingPropertyDefinition", "psetdef")],
    "psetdef": [("Name", "label"), ("HasProperties", "prop"), ("Quantities", "qty")],
    "prop": [("Name", "propname"), ("NominalValue", "value")],
    "qty": [("Name", "qtyname"), ("LengthValue", "real")],
    "reltype": [("RelatingType", "type")],
    "type": [("Name", "label"), ("HasPropertySets", "psetdef"), ("PredefinedType", "enum")],
    "relcont": [("RelatingStructure", "storey")],
    "storey": [("Name", "label"), ("Elevation", "real")],
}
INSTANCE_TYPES = {
    "element": ("IfcWall", "IfcDoor", "IfcWindow", "IfcSlab"),
    "reldef": ("IfcRelDefinesByProperties",),
    "psetdef": ("IfcPropertySet", "IfcElementQuantity"),
    "prop": ("IfcPropertySingleValue",),
    "qty": ("IfcQuantityLength",),
    "reltype": ("IfcRelDefinesByType",),
    "type": ("IfcWallType",),
    "relcont": ("IfcRelContainedInSpatialStructure",),
    "storey": ("IfcBuildingStorey",),
}
VALUE_TYPES = ("IfcBoolean", "IfcLabel", "IfcReal", "IfcInteger", "IfcLengthMeasure")
ROOTS = ("IfcWall", "IfcDoor", "IfcSlab", "IfcWindow", "IfcElement", "IfcBuildingElement")
COMPARATORS = ("=", "!=", "<", ">", "<=", ">=")


class RuleGenerator:
    """Random MVDLite rule text over the vocabulary of the synthetic models."""

    def __init__(self, rng: random.Random, max_depth: int = 3):
        self.rng = rng
        self.max_depth = max_depth

    def literal(self, kind: str) -> str:
        rng = self.rng
        if kind == "label":
            return "'" + rng.choice(ELEMENT_NAMES + PSET_NAMES + TYPE_NAMES + STOREY_NAMES + LABELS) + "'"
        if kind == "propname":
            return "'" + rng.choice(PROP_NAMES) + "'"
        if kind == "qtyname":
            return "'" + rng.choice(QUANTITY_NAMES) + "'"
        if kind == "enum":
            return "." + rng.choice([v for vs in ELEMENT_TYPES.values() for v in vs]) + "."
        if kind == "real":
            return rng.choice(("0", "0.5", "1", "2.1", "3.0", "-1"))
        return rng.choice(("TRUE", "FALSE", "'EI60'", "'A'", "''", "0.5", "1", "2", "0.2"))

    def single(self, kind: str) -> str:
        rng = self.rng
        if kind in PATHS:
            op = rng.choice(("=", "!="))
            return f"[Type]{op}{rng.choice(INSTANCE_TYPES[kind] + ('IfcRoot', 'IfcObject'))}"
        r = rng.random()
        if r < 0.15:
            return f"[Type]{rng.choice(('=', '!='))}{rng.choice(VALUE_TYPES)}"
        if r < 0.3:
            return "=" + "|".join(self.literal(kind) for _ in range(rng.randint(2, 3)))
        if r < 0.55:
            return "=" + self.literal(kind)
        return f"[Value]{rng.choice(COMPARATORS)}{self.literal(kind)}"

    def collection(self) -> str:
        rng = self.rng
        r = rng.random()
        if r < 0.4:
            return f"[Exists]={rng.choice(('TRUE', 'FALSE'))}"
        if r < 0.8:
            return f"[Size]{rng.choice(COMPARATORS)}{rng.randint(0, 3)}"
        return f"[Unique]={rng.choice(('TRUE', 'FALSE'))}"

    def step(self, kind: str, depth: int) -> str:
        """One attribute step from ``kind`` and a filter on what it reaches."""
        rng = self.rng
        attr, child = rng.choice(PATHS[kind])
        head = f"->{attr}"
        r = rng.random()
        if r < 0.25:
            return head + self.collection()
        if child not in PATHS or depth <= 0 or r < 0.4:
            return head + self.single(child)
        if r < 0.75:
            return head + self.step(child, depth - 1)
        return head + "(" + self.filter(child, depth - 1) + ")" + (self.step(child, depth - 1)
                                                                    if rng.random() < 0.3 else "")

    def filter(self, kind: str, depth: int) -> str:
        rng = self.rng
        r = rng.random()
        if depth <= 0 or r < 0.45:
            return self.step(kind, depth)
        if r < 0.55:
            return "NOT " + self.atom(kind, depth - 1)
        word = rng.choice((" AND ", " OR ", " XOR "))
        return word.join(self.atom(kind, depth - 1) for _ in range(rng.randint(2, 3)))

    def atom(self, kind: str, depth: int) -> str:
        text = self.filter(kind, depth)
        return "(" + text + ")" if " " in text else text

    def rule_body(self) -> str:
        rng = self.rng
        r = rng.random()
        if r < 0.05:
            return self.collection()
        if r < 0.12:
            # a mapping: ends in an attribute
            return rng.choice(("->IsDefinedBy->RelatingPropertyDefinition", "->IsTypedBy->RelatingType",
                               "->ContainedInStructure"))
        return self.filter("element", self.max_depth)

    def rule(self, root: Optional[str] = None) -> str:
        return f"{root or self.rng.choice(ROOTS)} {self.rule_body()};"

    def concept(self, name: str) -> str:
        parent = self.rng.choice(ROOTS[:4])
        lines = [f"concept {name} extends {parent} {{", "  definition:", f"    {self.filter('element', 1)};",
                 "  constraint:"]
        for _ in range(self.rng.randint(1, 2)):
            lines.append(f"    {self.rule_body()};")
        lines.append("}")
        return "\n".join(lines)


def _exportable(text: str, schema: SchemaTable) -> bool:
    from .lang import parse, resolve
    from .mvdxml import to_mvdxml
    try:
        to_mvdxml(resolve(parse(text), schema), schema, strict=True, resolved=True)
    except InexpressibleError:
        return False
    return True


def random_ruleset(seed: int, n_rules: int = 50, schema: Optional[SchemaTable] = None, *, exportable: bool = True,
                   max_depth: int = 3, concepts: float = 0.1) -> str:
    """MVDLite text with ``n_rules`` top-level rules and concept blocks.

    Each piece is checked on its own; with ``exportable`` only pieces that
    convert to mvdXML in strict mode are kept.  Pieces that do not resolve
    against the schema are always discarded.
    """
    from .lang import parse, resolve
    schema = schema or get_schema("IFC4")
    rng = random.Random(seed)
    gen = RuleGenerator(rng, max_depth)
    pieces = []
    count = 0
    attempts = 0
    while count < n_rules:
        attempts += 1
        if attempts > n_rules * 200:
            raise RuntimeError("rule generator keeps producing unusable rules")
        is_concept = rng.random() < concepts
        text = gen.concept(f"Concept{len(pieces)}") if is_concept else gen.rule()
        try:
            resolve(parse(text), schema)
        except MvdLiteError:
            continue
        if exportable and not _exportable(text, schema):
            continue
        pieces.append(text)
        count += text.count(";") - 1 if is_concept else 1
    return "\n".join(pieces) + "\n"


def benchmark_rules(n_rules: int = 300, seed: int = 1) -> str:
    """Rules with long shared prefixes and selective early filters."""
    rng = random.Random(seed)
    roots = ("IfcWall", "IfcDoor", "IfcSlab", "IfcWindow", "IfcBuildingElement")
    pool = []
    for root in roots:
        for pset in PSET_NAMES:
            for prop in PROP_NAMES:
                head = f"{root} ->IsDefinedBy->RelatingPropertyDefinition('{pset}')->HasProperties('{prop}')"
                pool.append(head + "->NominalValue[Exists]=TRUE;")
                pool.append(head + f"->NominalValue[Value]!={rng.choice(('TRUE', 'FALSE', chr(39) + 'x' + chr(39)))};")
                pool.append(f"{root} ->IsTypedBy->RelatingType->HasPropertySets('{pset}')->HasProperties('{prop}')"
                            f"->NominalValue[Exists]=TRUE;")
        for qto in QTO_NAMES:
            for q in QUANTITY_NAMES:
                pool.append(f"{root} ->IsDefinedBy->RelatingPropertyDefinition('{qto}')->Quantities('{q}')"
                            f"->LengthValue[Value]>0.2;")
    rng.shuffle(pool)
    return "\n".join(sorted(pool[:n_rules])) + "\n"


def duplex_rules() -> str:
    """58 checks of the kind a design-review view would ask for."""
    rules = []
    for ent, pset in (("IfcWall", "Pset_WallCommon"), ("IfcDoor", "Pset_DoorCommon"),
                      ("IfcWindow", "Pset_WindowCommon"), ("IfcSlab", "Pset_SlabCommon")):
        rules += [
            f"{ent} ->Name[Exists]=TRUE;",
            f"{ent} ->GlobalId[Exists]=TRUE;",
            f"{ent} ->Representation[Exists]=TRUE;",
            f"{ent} ->ObjectPlacement[Exists]=TRUE;",
            f"{ent} ->ContainedInStructure->RelatingStructure[Size]=1;",
            f"{ent} ->IsDefinedBy->RelatingPropertyDefinition->Name='{pset}';",
            f"{ent} ->IsDefinedBy->RelatingPropertyDefinition('{pset}')->HasProperties('IsExternal')"
            f"->NominalValue[Type]=IfcBoolean;",
            f"{ent} ->IsDefinedBy->RelatingPropertyDefinition('{pset}')->HasProperties('LoadBearing')"
            f"->NominalValue=TRUE|FALSE;",
            f"{ent} ->IsDefinedBy->RelatingPropertyDefinition('{pset}')->HasProperties('FireRating')"
            f"->NominalValue!='';",
            f"{ent} ->IsDefinedBy->RelatingPropertyDefinition->HasProperties->Name[Unique]=TRUE;",
            f"{ent} ->IsDefinedBy->RelatingPropertyDefinition('Qto_WallBaseQuantities')->Quantities('Length')"
            f"->LengthValue>0;",
            f"{ent} ->IsTypedBy->RelatingType->Name[Exists]=TRUE;",
            f"{ent} ->PredefinedType!=.NOTDEFINED.;",
        ]
    rules += [
        "IfcDoor ->OverallHeight>=2.0;",
        "IfcDoor ->OverallHeight<=2.4 AND ->OverallHeight>=2.0;",
        "IfcBuildingStorey ->Name[Exists]=TRUE;",
        "IfcBuildingStorey ->Elevation[Value]>=0;",
        "IfcBuildingStorey ->ContainsElements->RelatedElements[Size]>0;",
        "IfcWallType ->HasPropertySets[Exists]=TRUE;",
    ]
    assert len(rules) == 58
    return "\n".join(rules) + "\n"
