"""Regenerate src/mvdlite/schemas/*.json from the web-ifc npm package.

web-ifc ships TypeScript typings generated from the official EXPRESS long
forms (attribute order, optionality, aggregation, select and enumeration
members) and a JavaScript table of inverse attributes.  The abstract flag is
not carried by either file, so a short curated list supplies it.

    npm pack web-ifc@0.0.57 && tar xzf web-ifc-0.0.57.tgz
    python3 tools/gen_schema.py package/
"""
import json
import re
import sys
from pathlib import Path

SCHEMAS = {"IFC2X3": 1, "IFC4": 2}

ABSTRACT = {
    "IFC2X3": """IfcRoot IfcObjectDefinition IfcObject IfcProduct IfcElement IfcBuildingElement
        IfcRelationship IfcRelDefines IfcRelConnects IfcRelAssigns IfcRelAssociates IfcRelDecomposes
        IfcPropertyDefinition IfcPropertySetDefinition IfcProperty IfcSimpleProperty
        IfcRepresentationItem IfcGeometricRepresentationItem IfcPlacement IfcObjectPlacement
        IfcRepresentation IfcProductRepresentation IfcSpatialStructureElement IfcCurve IfcSurface
        IfcSolidModel IfcProfileDef IfcNamedUnit IfcElementType IfcBuildingElementType
        IfcPhysicalQuantity IfcPhysicalSimpleQuantity IfcControl IfcGroup IfcProcess IfcResource
        IfcActor IfcDistributionElement IfcFeatureElement IfcFeatureElementSubtraction""",
    "IFC4": """IfcRoot IfcObjectDefinition IfcObject IfcProduct IfcElement IfcBuildingElement
        IfcRelationship IfcRelDefines IfcRelConnects IfcRelAssigns IfcRelAssociates IfcRelDecomposes
        IfcPropertyDefinition IfcPropertySetDefinition IfcProperty IfcSimpleProperty
        IfcPropertyAbstraction IfcRepresentationItem IfcGeometricRepresentationItem IfcPlacement
        IfcObjectPlacement IfcRepresentation IfcProductRepresentation IfcSpatialStructureElement
        IfcSpatialElement IfcCurve IfcSurface IfcSolidModel IfcNamedUnit IfcElementType
        IfcBuildingElementType IfcPhysicalQuantity IfcPhysicalSimpleQuantity IfcContext
        IfcTypeProduct IfcTypeProcess IfcTypeResource IfcFeatureElement
        IfcFeatureElementSubtraction IfcPreDefinedPropertySet IfcQuantitySet""",
}

CLASS = re.compile(r"^    class (\w+)(?: extends (\w+))? \{$")
ALIAS = re.compile(r"^    type (\w+) = (.+);$")
FIELD = re.compile(r"^        (\w+): (.+);$")
STATIC = re.compile(r"^        static (\w+): any;$")


def names_in(text):
    text = re.sub(r"Handle<(\w+)>", r"\1", text)
    out = []
    for n in re.findall(r"\w+", text):
        if n not in out and n != "null":
            out.append(n)
    return out


def split_params(text):
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "(<[":
            depth += 1
        elif ch in ")>]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return parts


def parse_typings(lines):
    entities, defined, enums, selects = {}, {}, {}, {}
    i = 0
    while i < len(lines):
        line = lines[i]
        m = ALIAS.match(line)
        if m:
            selects[m.group(1)] = names_in(m.group(2))
            i += 1
            continue
        m = CLASS.match(line)
        if not m:
            i += 1
            continue
        name, parent = m.group(1), m.group(2)
        body = []
        i += 1
        while lines[i] != "    }":
            body.append(lines[i])
            i += 1
        i += 1
        statics = [STATIC.match(b).group(1) for b in body if STATIC.match(b)]
        fields = [FIELD.match(b).groups() for b in body if FIELD.match(b)]
        ctor = [b for b in body if b.startswith("        constructor(")]
        if parent is not None and ctor:
            params = ctor[0].strip()[len("constructor("):-len(");")]
            fields = [tuple(p.split(": ", 1)) for p in split_params(params)]
        fields = [(n, t) for n, t in fields if n not in ("type", "name", "expressID")]
        if parent is None and statics:
            enums[name] = statics
        elif parent is None:
            value = dict(fields).get("value", "string")
            kind = {"string": "STRING", "number": "REAL", "boolean": "BOOLEAN"}.get(value.split("|")[0].strip(), "REAL")
            if value.endswith("[]"):
                kind = "LIST"
            if name in ("IfcLogical",):
                kind = "LOGICAL"
            if name in ("IfcInteger", "IfcCountMeasure", "IfcPositiveInteger", "IfcDayInMonthNumber",
                        "IfcMonthInYearNumber", "IfcHourInDay", "IfcMinuteInHour", "IfcDimensionCount",
                        "IfcNumericMeasure", "IfcTimeStamp", "IfcCardinalPointReference",
                        "IfcDayInWeekNumber", "IfcYearNumber", "IfcInteger", "IfcDuration"):
                kind = "INTEGER" if name not in ("IfcNumericMeasure", "IfcDuration") else kind
            if name == "IfcBinary":
                kind = "BINARY"
            defined[name] = kind
        else:
            attrs = []
            for fname, ftype in fields:
                optional = ftype.endswith("| null")
                core = ftype[: -len("| null")].strip() if optional else ftype
                aggregate = core.endswith("[]")
                core = core.rstrip("[]").strip()
                tnames = names_in(core)
                attrs.append((fname, tnames[0] if len(tnames) == 1 else core, optional, aggregate))
            entities[name] = {"supertype": None if parent == "IfcLineObject" else parent, "fields": attrs}
    return entities, defined, enums, selects


def depth(entities, name):
    d = 0
    while entities[name]["supertype"]:
        name = entities[name]["supertype"]
        d += 1
    return d


def main(pkg):
    pkg = Path(pkg)
    dts = (pkg / "ifc-schema.d.ts").read_text().splitlines()
    js = (pkg / "web-ifc-api-node.js").read_text()
    codes = {int(c): n for n, c in re.findall(r"^var (IFC\w+) = (\d+);$", js, re.M)}
    starts = [i for i, l in enumerate(dts) if l.startswith("export declare namespace")]
    out_dir = Path(__file__).resolve().parents[1] / "src" / "mvdlite" / "schemas"
    for schema_id, idx in SCHEMAS.items():
        start = next(i for i in starts if dts[i].startswith(f"export declare namespace {schema_id} "))
        end = next((i for i in starts if i > start), len(dts))
        entities, defined, enums, selects = parse_typings(dts[start:end])
        # derived redeclarations (e.g. IfcGeometricRepresentationSubContext) drop
        # inherited slots from the constructor; restore the effective order
        for name in sorted(entities, key=lambda n: depth(entities, n)):
            parent = entities[name]["supertype"]
            if parent:
                pf = entities[parent]["fields"]
                if [f[0] for f in entities[name]["fields"][:len(pf)]] != [f[0] for f in pf]:
                    pnames = {f[0] for f in pf}
                    entities[name]["fields"] = pf + [f for f in entities[name]["fields"] if f[0] not in pnames]
        upper = {n.upper(): n for n in entities}
        block = re.search(r"InversePropertyDef\[%d\] = \{\n(.*?)\n\};" % idx, js, re.S).group(1)
        inverses = {}
        for code, items in re.findall(r"^  (\d+): (\[.*\]),?$", block, re.M):
            ename = upper[codes[int(code)]]
            inverses[ename] = [(n, upper[s], int(p)) for n, s, p in
                               re.findall(r'\["(\w+)", (IFC\w+), (\d+), (?:true|false)\]', items)]
        table = {"format": "mvdlite-schema-table", "format_version": 1, "schema_id": schema_id,
                 "entities": {}, "defined_types": defined, "enumerations": enums,
                 "selects": {k: v for k, v in selects.items() if k not in entities}}
        abstract = set(ABSTRACT[schema_id].split())
        for name in sorted(entities):
            ent = entities[name]
            parent = ent["supertype"]
            inherited = len(entities[parent]["fields"]) if parent else 0
            if parent:
                assert [f[0] for f in entities[parent]["fields"]] == [f[0] for f in ent["fields"][:inherited]], name
            own = ent["fields"][inherited:]
            parent_inv = {i[0] for i in inverses.get(parent, [])} if parent else set()
            inv = []
            for iname, source, pos in inverses.get(name, []):
                if iname in parent_inv:
                    continue
                inv.append([iname, source, entities[source]["fields"][pos][0]])
            table["entities"][name] = {
                "supertype": parent, "abstract": name in abstract,
                "attributes": [[n, t, o, a] for n, t, o, a in own],
                "inverse": inv,
            }
        missing = abstract - set(entities)
        assert not missing, missing
        (out_dir / f"{schema_id}.json").write_text(json.dumps(table, indent=1, sort_keys=True) + "\n")
        print(schema_id, len(entities), "entities")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "package")
