"""IFC schema metadata loaded from the precompiled JSON tables in ``schemas/``.

The table format is documented in docs/schema-table.md.  Names are matched
case-insensitively because SPF files spell entity names in upper case.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

from ..errors import SchemaError, UnknownTypeError

KNOWN_SCHEMA_IDS = ("IFC2X3", "IFC4", "IFC4X1", "IFC4X2", "IFC4X3")
TABLE_FORMAT = "mvdlite-schema-table"
SCHEMA_DIR_ENV = "MVDLITE_SCHEMA_DIR"


@dataclass(frozen=True)
class AttributeDef:
    name: str
    type: str
    optional: bool
    aggregate: bool
    position: int = -1  # index in the effective attribute list


@dataclass(frozen=True)
class InverseDef:
    name: str
    source: str     # entity whose forward attribute points here
    attribute: str  # that forward attribute


@dataclass(frozen=True)
class EntityDef:
    name: str
    supertype: Optional[str]
    is_abstract: bool
    attributes: tuple = ()          # own attributes only
    inverse_attributes: tuple = ()  # own inverse attributes only


class SchemaTable:
    """Immutable view over one IFC schema version."""

    def __init__(self, schema_id: str, entities: dict, defined_types: dict,
                 enumerations: dict, selects: Optional[dict] = None):
        self.schema_id = schema_id
        self.entities = dict(entities)
        self.defined_types = dict(defined_types)
        self.enumerations = {k: tuple(v) for k, v in enumerations.items()}
        self.selects = {k: tuple(v) for k, v in (selects or {}).items()}
        self._canon = {}
        for table in (self.selects, self.enumerations, self.defined_types, self.entities):
            for name in table:
                self._canon[name.upper()] = name
        self._subtypes = {}
        for name, ent in self.entities.items():
            if ent.supertype:
                self._subtypes.setdefault(ent.supertype, []).append(name)
        self._effective = {}
        self._inverse = {}
        self._closure = {}
        self._members = {}
        self._check()

    def __repr__(self):
        return f"SchemaTable({self.schema_id!r}, {len(self.entities)} entities)"

    # -- validation ---------------------------------------------------------

    def _check(self):
        if self.schema_id not in KNOWN_SCHEMA_IDS:
            raise SchemaError(f"unknown schema id {self.schema_id!r}")
        for name, ent in self.entities.items():
            seen = {name}
            cur = ent.supertype
            while cur is not None:
                if cur in seen:
                    raise SchemaError(f"cyclic supertype chain at {name}")
                if cur not in self.entities:
                    raise SchemaError(f"{name}: unknown supertype {cur}")
                seen.add(cur)
                cur = self.entities[cur].supertype
        for name in self.entities:
            names = [a.name for a in self.effective_attributes(name)]
            if len(names) != len(set(names)):
                raise SchemaError(f"{name}: duplicate attribute names")
            for inv in self.entities[name].inverse_attributes:
                if inv.source not in self.entities:
                    raise SchemaError(f"{name}.{inv.name}: unknown source entity {inv.source}")
                if self.forward_attribute(inv.source, inv.attribute) is None:
                    raise SchemaError(f"{name}.{inv.name}: {inv.source} has no attribute {inv.attribute}")

    # -- names ----------------------------------------------------------------

    def canonical(self, name: str) -> str:
        try:
            return self._canon[name.upper()]
        except KeyError:
            raise UnknownTypeError(f"unknown type {name!r} in {self.schema_id}") from None

    def knows(self, name: str) -> bool:
        return name.upper() in self._canon

    def is_entity(self, name: str) -> bool:
        canon = self._canon.get(name.upper())
        return canon is not None and canon in self.entities

    def entity(self, name: str) -> EntityDef:
        canon = self.canonical(name)
        if canon not in self.entities:
            raise UnknownTypeError(f"{name!r} is not an entity in {self.schema_id}")
        return self.entities[canon]

    # -- hierarchy ------------------------------------------------------------

    def supertypes(self, name: str) -> list:
        """``name`` followed by its ancestors, nearest first."""
        out = []
        cur = self.entity(name).name
        while cur is not None:
            out.append(cur)
            cur = self.entities[cur].supertype
        return out

    def subtypes(self, name: str) -> frozenset:
        """Subtype closure of an entity, including itself."""
        canon = self.entity(name).name
        hit = self._closure.get(canon)
        if hit is None:
            out, stack = set(), [canon]
            while stack:
                cur = stack.pop()
                out.add(cur)
                stack.extend(self._subtypes.get(cur, ()))
            hit = self._closure[canon] = frozenset(out)
        return hit

    def is_subtype(self, a: str, b: str) -> bool:
        b = self.entity(b).name
        return b in self.supertypes(a)

    def members(self, type_name: str) -> frozenset:
        """All concrete names a value of ``type_name`` may carry: the subtype closure
        for entities, the flattened member closure for selects, the name itself
        otherwise."""
        canon = self.canonical(type_name)
        hit = self._members.get(canon)
        if hit is not None:
            return hit
        if canon in self.entities:
            out = set(self.subtypes(canon))
        elif canon in self.selects:
            out, seen, stack = set(), set(), [canon]
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                if cur in self.selects:
                    out.add(cur)
                    stack.extend(self.canonical(m) for m in self.selects[cur] if self.knows(m))
                elif cur in self.entities:
                    out |= self.subtypes(cur)
                else:
                    out.add(cur)
        else:
            out = {canon}
        hit = self._members[canon] = frozenset(out)
        return hit

    def is_compatible(self, constraint: str, declared: str) -> bool:
        """Whether values restricted to ``constraint`` can occur where ``declared`` is expected."""
        c = self.canonical(constraint)
        members = self.members(declared)
        if c in members:
            return True
        if c in self.selects:
            return bool(self.members(c) & members)
        return False

    # -- attributes -------------------------------------------------------------

    def effective_attributes(self, name: str) -> tuple:
        canon = self.entity(name).name
        hit = self._effective.get(canon)
        if hit is None:
            chain = list(reversed(self.supertypes(canon)))
            attrs = []
            for ent in chain:
                for a in self.entities[ent].attributes:
                    attrs.append(AttributeDef(a.name, a.type, a.optional, a.aggregate, len(attrs)))
            hit = self._effective[canon] = tuple(attrs)
        return hit

    def effective_inverse(self, name: str) -> tuple:
        canon = self.entity(name).name
        hit = self._inverse.get(canon)
        if hit is None:
            out = []
            for ent in reversed(self.supertypes(canon)):
                out.extend(self.entities[ent].inverse_attributes)
            hit = self._inverse[canon] = tuple(out)
        return hit

    def forward_attribute(self, entity: str, attr: str) -> Optional[AttributeDef]:
        for a in self.effective_attributes(entity):
            if a.name == attr:
                return a
        return None

    def inverse_attribute(self, entity: str, attr: str) -> Optional[InverseDef]:
        for a in self.effective_inverse(entity):
            if a.name == attr:
                return a
        return None

    def attribute(self, entity: str, attr: str) -> Union[AttributeDef, InverseDef, None]:
        return self.forward_attribute(entity, attr) or self.inverse_attribute(entity, attr)

    def attribute_type(self, entity: str, attr: str) -> Optional[str]:
        """Declared target type: element type of a forward attribute, source entity of an inverse one."""
        a = self.attribute(entity, attr)
        if a is None:
            return None
        return a.type if isinstance(a, AttributeDef) else a.source

    def entities_defining(self, attr: str, within: str) -> list:
        """Entities among the members of ``within`` that define ``attr`` themselves or by inheritance."""
        out = []
        for name in sorted(self.members(within)):
            if name in self.entities and self.attribute(name, attr) is not None:
                out.append(name)
        return out


# -- loading ------------------------------------------------------------------

def _from_doc(doc: dict) -> SchemaTable:
    if not isinstance(doc, dict) or doc.get("format") != TABLE_FORMAT:
        raise SchemaError("not a schema-table document")
    try:
        entities = {}
        for name, e in doc["entities"].items():
            attrs = tuple(AttributeDef(a[0], a[1], bool(a[2]), bool(a[3])) for a in e.get("attributes", ()))
            invs = tuple(InverseDef(i[0], i[1], i[2]) for i in e.get("inverse", ()))
            entities[name] = EntityDef(name, e.get("supertype"), bool(e.get("abstract", False)), attrs, invs)
        return SchemaTable(doc["schema_id"], entities, doc.get("defined_types", {}),
                           doc.get("enumerations", {}), doc.get("selects", {}))
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaError(f"malformed schema table: {exc!r}") from None


def load_schema(schema_doc) -> SchemaTable:
    """Build a :class:`SchemaTable` from a parsed document, JSON text or a file path."""
    if isinstance(schema_doc, dict):
        return _from_doc(schema_doc)
    if isinstance(schema_doc, Path) or (isinstance(schema_doc, str) and not schema_doc.lstrip().startswith("{")):
        schema_doc = Path(schema_doc).read_text(encoding="utf-8")
    try:
        doc = json.loads(schema_doc)
    except ValueError as exc:
        raise SchemaError(f"malformed schema table: {exc}") from None
    return _from_doc(doc)


def schema_dirs() -> list:
    dirs = []
    env = os.environ.get(SCHEMA_DIR_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(Path(__file__).resolve().parent.parent / "schemas")
    return dirs


def schema_id_for(header_schema: str) -> str:
    """Map a FILE_SCHEMA identifier such as 'IFC2X3_TC1' to a table id."""
    s = header_schema.upper()
    for known in sorted(KNOWN_SCHEMA_IDS, key=len, reverse=True):
        if s.startswith(known):
            return known
    raise SchemaError(f"unsupported schema {header_schema!r}")


@lru_cache(maxsize=None)
def get_schema(schema_id: str) -> SchemaTable:
    """Load the bundled (or $MVDLITE_SCHEMA_DIR) table for a schema id, cached."""
    sid = schema_id_for(schema_id)
    for d in schema_dirs():
        path = d / f"{sid}.json"
        if path.exists():
            return load_schema(path)
    raise SchemaError(f"no schema table for {sid}")


def is_subtype(schema: SchemaTable, a: str, b: str) -> bool:
    return schema.is_subtype(a, b)
