"""Instance graph for an SPF file, with type and reverse-reference indexes.

Parsing is lazy where it can be: one regex pass records where each ``#N=ENTITY(``
record starts, attribute lists are decoded on first access, and reverse
references are indexed per (source type, attribute) on first use.  Reference
integrity is still checked for the whole file up front.
"""
from __future__ import annotations

import re
import threading
from array import array
from collections.abc import Mapping
from typing import Iterable, Optional

import numpy as np

from ..errors import StepSyntaxError, UnknownTypeError, UnresolvedReferenceError
from .schema import AttributeDef, SchemaTable, get_schema, schema_id_for
from .step import (DERIVED, UNSET, Ref, Typed, format_value, iter_refs,
                   parse_args, syntax_error)

_RECORD = re.compile(r"'(?:[^']|'')*'|/\*[\s\S]*?\*/|#(\d+)[ \t\r\n]*=[ \t\r\n]*([A-Za-z_][A-Za-z0-9_]*)[ \t\r\n]*\(")
_STRING_OR_COMMENT = re.compile(r"'(?:[^']|'')*'|/\*[\s\S]*?\*/")
_REF = re.compile(r"#(\d+)(?!\d)(?![ \t\r\n]*=)")
_BAD = re.compile(r"[^A-Za-z0-9_ \t\r\n#=(),.$*+\-\";]")
_HEADER_ITEM = re.compile(r"[ \t\r\n]*([A-Za-z_][A-Za-z0-9_]*)[ \t\r\n]*\(")
_HEADER = re.compile(r"HEADER[ \t\r\n]*;", re.I)
_DATA = re.compile(r"DATA[ \t\r\n]*;", re.I)
_ENDSEC = re.compile(r"ENDSEC[ \t\r\n]*;", re.I)
_CHUNK = 50_000  # records per integrity-check slice


class ValueNode:
    """A non-instance value reached through an attribute.

    Identity is (owning instance, attribute path); ``path`` holds the attribute
    position followed by aggregate indexes.
    """

    __slots__ = ("owner", "path", "value", "type_name")

    def __init__(self, owner: int, path: tuple, value, type_name: Optional[str]):
        self.owner = owner
        self.path = path
        self.value = value
        self.type_name = type_name

    def __eq__(self, other):
        return isinstance(other, ValueNode) and self.owner == other.owner and self.path == other.path

    def __hash__(self):
        return hash((self.owner, self.path))

    def __repr__(self):
        return f"ValueNode(#{self.owner}{''.join(f'[{p}]' for p in self.path)}={self.value!r})"

    def sort_key(self):
        return (self.owner, 1, self.path)


def node_sort_key(node):
    if isinstance(node, ValueNode):
        return node.sort_key()
    return (node, 0, ())


class NodeSet:
    """Ordered, duplicate-free collection of nodes (ints for instances, ValueNode for values).

    Compares equal to a set/frozenset with the same members, and to a list,
    tuple or NodeSet with the same members in the same order.
    """

    __slots__ = ("_items",)

    def __init__(self, nodes: Iterable = ()):
        self._items = dict.fromkeys(nodes)

    @classmethod
    def sorted(cls, nodes: Iterable) -> "NodeSet":
        return cls(sorted(set(nodes), key=node_sort_key))

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __contains__(self, node):
        return node in self._items

    def __bool__(self):
        return bool(self._items)

    def __eq__(self, other):
        if isinstance(other, (set, frozenset)):
            return set(self._items) == other
        if isinstance(other, NodeSet):
            return list(self._items) == list(other._items)
        if isinstance(other, (list, tuple)):
            return list(self._items) == list(other)
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return "NodeSet([" + ", ".join(f"#{n}" if isinstance(n, int) else repr(n) for n in self._items) + "])"

    def to_set(self) -> frozenset:
        return frozenset(self._items)

    def ids(self) -> list:
        return [n for n in self._items if not isinstance(n, ValueNode)]


class Instance:
    __slots__ = ("id", "type_name", "attributes")

    def __init__(self, id: int, type_name: str, attributes: tuple):
        self.id = id
        self.type_name = type_name
        self.attributes = attributes

    def __repr__(self):
        return f"#{self.id}={self.type_name}{format_value(tuple(self.attributes))}"

    def __eq__(self, other):
        return (isinstance(other, Instance) and self.id == other.id
                and self.type_name == other.type_name and self.attributes == other.attributes)

    __hash__ = None


class _InstanceView(Mapping):
    def __init__(self, model: "Model"):
        self._model = model

    def __getitem__(self, iid):
        m = self._model
        if iid not in m:
            raise KeyError(iid)
        return Instance(iid, m.type_of(iid), m.attributes(iid))

    def __iter__(self):
        return iter(self._model.ids)

    def __len__(self):
        return len(self._model)

    def __contains__(self, iid):
        return iid in self._model


class Model:
    """Parsed SPF population.  Immutable once built; safe for concurrent readers.

    Per-record data lives in flat arrays (row = file order) so that models
    with millions of records stay within a small multiple of the file size.
    """

    def __init__(self, schema: SchemaTable, header: dict, text: str, ids: np.ndarray,
                 codes: np.ndarray, starts: np.ndarray, type_names: list, source=None):
        self.schema = schema
        self.header = header
        self.source = source
        self._text = text
        self._n = n = len(ids)
        self._type_names = type_names  # code -> canonical entity name
        top = int(ids.max()) + 1 if n else 0
        if top <= 4 * n + 1024:
            dense = np.full(top, -1, dtype=np.int32)
            dense[ids] = np.arange(n, dtype=np.int32)
            self._dense = array("i", dense.tobytes())
            self._sparse = None
        else:
            self._dense = None
            self._sparse = dict(zip(ids.tolist(), range(n)))
        self._top = top
        self._sorted_ids = np.sort(ids)
        self._attrs = {}
        self._lock = threading.Lock()
        self._rev = {}
        self._full_rev = None
        self._attr_pos = {}
        order = np.lexsort((ids, codes))
        self.type_index = {}
        if len(order):
            sc = codes[order]
            bounds = np.flatnonzero(np.diff(sc)) + 1
            for chunk in np.split(order, bounds):
                self.type_index[type_names[codes[chunk[0]]]] = ids[chunk]
        self.instances = _InstanceView(self)
        # array indexing returns plain ints, which is faster than numpy on the hot path
        self._codes = array("i", codes.astype(np.int32).tobytes())
        self._starts = array("q", starts.astype(np.int64).tobytes())

    def _row(self, iid) -> int:
        if self._dense is not None:
            r = self._dense[iid] if 0 <= iid < self._top else -1
            if r < 0:
                raise KeyError(iid)
            return r
        return self._sparse[iid]

    def __len__(self):
        return self._n

    def __contains__(self, iid):
        if not isinstance(iid, int):
            return False
        try:
            self._row(iid)
        except KeyError:
            return False
        return True

    @property
    def ids(self) -> list:
        """All instance ids, ascending."""
        return self._sorted_ids.tolist()

    @property
    def schema_name(self) -> str:
        return self.header["file_schema"][0][0]

    def type_of(self, iid: int) -> str:
        return self._type_names[self._codes[self._row(iid)]]

    def attributes(self, iid: int) -> tuple:
        hit = self._attrs.get(iid)
        if hit is None:
            start = self._starts[self._row(iid)]
            values, _ = parse_args(self._text, start, self.source)
            hit = tuple(values)
            n = len(self.schema.effective_attributes(self.type_of(iid)))
            if len(hit) != n:
                raise syntax_error(self._text, start, f"{self.type_of(iid)} expects {n} attributes, found {len(hit)}",
                                   self.source)
            self._attrs[iid] = hit
        return hit

    def attribute_position(self, entity: str, attr: str) -> Optional[int]:
        key = (entity, attr)
        if key not in self._attr_pos:
            a = self.schema.forward_attribute(entity, attr)
            self._attr_pos[key] = a.position if a is not None else None
        return self._attr_pos[key]

    def instances_of(self, type_name: str, include_subtypes: bool = True) -> list:
        names = self.schema.subtypes(type_name) if include_subtypes else (self.schema.entity(type_name).name,)
        parts = [self.type_index[n] for n in names if n in self.type_index]
        if not parts:
            return []
        if len(parts) == 1:
            return parts[0].tolist()
        out = np.concatenate(parts)
        out.sort()
        return out.tolist()

    # -- reverse references -------------------------------------------------------

    def _rev_for(self, entity: str, pos: int) -> dict:
        key = (entity, pos)
        hit = self._rev.get(key)
        if hit is None:
            hit = {}
            for sid in self.type_index[entity].tolist() if entity in self.type_index else ():
                for t in dict.fromkeys(iter_refs(self.attributes(sid)[pos])):
                    hit.setdefault(t, []).append(sid)
            with self._lock:
                hit = self._rev.setdefault(key, hit)
        return hit

    def referrers(self, target: int, source_entity: str, attr: str) -> list:
        """Instances of ``source_entity`` (subtypes included) whose ``attr`` references ``target``."""
        out = []
        for ent in self.schema.subtypes(source_entity):
            if ent not in self.type_index:
                continue
            pos = self.attribute_position(ent, attr)
            if pos is None:
                continue
            out.extend(self._rev_for(ent, pos).get(target, ()))
        if len(out) > 1:
            out.sort()
        return out

    @property
    def reverse_index(self) -> dict:
        """Full transpose of every reference occurrence: (target, source entity, attribute) -> sorted sources."""
        if self._full_rev is None:
            full = {}
            for sid in self.ids:
                ent = self.type_of(sid)
                attrs = self.schema.effective_attributes(ent)
                for a, value in zip(attrs, self.attributes(sid)):
                    for t in dict.fromkeys(iter_refs(value)):
                        full.setdefault((t, ent, a.name), []).append(sid)
            self._full_rev = full
        return self._full_rev

    # -- output ---------------------------------------------------------------------

    def data_lines(self) -> int:
        return self._n


# -- parsing ------------------------------------------------------------------------


def _parse_header(text: str, start: int, end: int, source) -> dict:
    header = {}
    pos = start
    while True:
        m = _HEADER_ITEM.match(text, pos)
        if m is None or m.start(1) >= end:
            break
        values, pos = parse_args(text, m.end(), source)
        semi = re.compile(r"[ \t\r\n]*;").match(text, pos)
        if semi is None:
            raise syntax_error(text, pos, "expected ';' after header entry", source)
        pos = semi.end()
        header[m.group(1).lower()] = tuple(values)
    if "file_schema" not in header:
        raise syntax_error(text, start, "missing FILE_SCHEMA in header", source)
    return header


def _first_bad(text: str, start: int, end: int):
    """Slow exact scan for the first lexical problem in the data section."""
    pos = start
    tok = re.compile(r"'(?:[^']|'')*'|/\*[\s\S]*?\*/|[A-Za-z0-9_ \t\r\n#=(),.$*+\-\";]+")
    while pos < end:
        m = tok.match(text, pos)
        if m is None:
            if text[pos] == "'":
                return pos, "unterminated string literal"
            if text.startswith("/*", pos):
                return pos, "unterminated comment"
            return pos, f"illegal character {text[pos]!r}"
        pos = m.end()
    return None


def parse_spf(text: str, schema: Optional[SchemaTable] = None, source: Optional[str] = None,
              eager: bool = False) -> Model:
    """Parse SPF text into a :class:`Model`.

    ``schema`` defaults to the bundled table named by FILE_SCHEMA.  With
    ``eager`` every attribute list is decoded immediately, which reports any
    syntax error inside a record at load time.
    """
    h = _HEADER.search(text)
    d = _DATA.search(text, h.end()) if h is not None else None
    if h is None or d is None:
        pos = 0 if h is None else h.start()
        raise syntax_error(text, pos, "missing HEADER or DATA section", source)
    header = _parse_header(text, h.end(), d.start(), source)
    if schema is None:
        schema = get_schema(schema_id_for(header["file_schema"][0][0]))
    start = d.end()
    end = -1
    for m in _ENDSEC.finditer(text, start):
        end = m.start()
    if end < start:
        raise syntax_error(text, len(text), "missing ENDSEC after DATA", source)

    ids, starts, codes = array("q"), array("q"), array("i")
    bounds = [start]
    name_codes = {}
    type_names = []
    for m in _RECORD.finditer(text, start, end):
        num = m.group(1)
        if num is None:
            continue
        ids.append(int(num))
        starts.append(m.end())
        n = m.group(2)
        c = name_codes.get(n)
        if c is None:
            try:
                canon = schema.entity(n).name
            except UnknownTypeError:
                raise UnknownTypeError(f"entity {n} (#{num}) is not defined in {schema.schema_id}") from None
            c = name_codes[n] = len(type_names)
            type_names.append(canon)
        codes.append(c)
        if len(ids) % _CHUNK == 0:
            bounds.append(m.start())
    bounds.append(end)

    # slices start at record boundaries, so no string or comment straddles two of them
    ref_parts = []
    for a, b in zip(bounds, bounds[1:]):
        stripped = _STRING_OR_COMMENT.sub("", text[a:b])
        if _BAD.search(stripped) or "'" in stripped or "/*" in stripped:
            bad = _first_bad(text, a, b)
            if bad is not None:
                raise syntax_error(text, bad[0], bad[1], source)
        found = _REF.findall(stripped)
        del stripped
        if found:
            ref_parts.append(np.unique(np.array(found, dtype=np.int64)))

    id_arr = np.frombuffer(ids, dtype=np.int64) if ids else np.zeros(0, dtype=np.int64)
    uniq = np.unique(id_arr)
    if len(uniq) != len(id_arr):
        dup = np.flatnonzero(np.bincount(np.searchsorted(uniq, id_arr)) > 1)[0]
        raise StepSyntaxError(f"duplicate instance id #{uniq[dup]}", None, None, None, source)
    if ref_parts:
        ref_arr = np.unique(np.concatenate(ref_parts))
        missing = ref_arr[~np.isin(ref_arr, uniq)]
        if len(missing):
            raise UnresolvedReferenceError(f"reference to undefined instance #{missing[0]}"
                                           + (f" in {source}" if source else ""))
    del uniq, ref_parts
    code_arr = np.frombuffer(codes, dtype=np.int32) if codes else np.zeros(0, dtype=np.int32)
    start_arr = np.frombuffer(starts, dtype=np.int64) if starts else np.zeros(0, dtype=np.int64)
    model = Model(schema, header, text, id_arr, code_arr, start_arr, type_names, source)
    if eager:
        for iid in model.ids:
            model.attributes(iid)
    return model


def read_spf(path, schema: Optional[SchemaTable] = None, eager: bool = False) -> Model:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        text = raw.decode("latin-1")
    return parse_spf(text, schema, source=str(path), eager=eager)


# -- writing --------------------------------------------------------------------------

def _header_text(header: dict) -> str:
    lines = ["HEADER;"]
    for key in ("file_description", "file_name", "file_schema"):
        if key in header:
            lines.append(f"{key.upper()}{format_value(tuple(header[key]))};")
    for key, values in header.items():
        if key not in ("file_description", "file_name", "file_schema"):
            lines.append(f"{key.upper()}{format_value(tuple(values))};")
    lines.append("ENDSEC;")
    return "\n".join(lines)


def write_records(header: dict, records: Iterable) -> str:
    """Serialize ``(id, entity name, attribute tuple)`` records as an SPF document."""
    out = ["ISO-10303-21;", _header_text(header), "DATA;"]
    for iid, name, attrs in records:
        out.append(f"#{iid}={name.upper()}{format_value(tuple(attrs))};")
    out.append("ENDSEC;")
    out.append("END-ISO-10303-21;")
    return "\n".join(out) + "\n"


def write_spf(model: Model, renumber: bool = True, header: Optional[dict] = None) -> str:
    """Serialize a model.  With ``renumber`` ids become 1..n in id order."""
    ids = model.ids
    mapping = {old: i + 1 for i, old in enumerate(ids)} if renumber else None

    def records():
        for old in ids:
            attrs = model.attributes(old)
            if mapping is not None:
                attrs = tuple(_remap(v, mapping) for v in attrs)
            yield (mapping[old] if mapping else old), model.type_of(old), attrs

    return write_records(header or model.header, records())


def _remap(value, mapping):
    if isinstance(value, Ref):
        return Ref(mapping[int(value)])
    if isinstance(value, Typed):
        return Typed(value.type_name, _remap(value.value, mapping))
    if isinstance(value, tuple):
        return tuple(_remap(v, mapping) for v in value)
    return value


# -- navigation ----------------------------------------------------------------------------


def _flatten(value, owner, path, type_name, out, schema):
    if value is UNSET or value is DERIVED:
        return
    if isinstance(value, Ref):
        out.append(int(value))
    elif isinstance(value, Typed):
        out.append(ValueNode(owner, path, value, schema.canonical(value.type_name) if schema.knows(value.type_name)
                             else value.type_name))
    elif isinstance(value, tuple):
        for i, v in enumerate(value):
            _flatten(v, owner, path + (i,), type_name, out, schema)
    else:
        out.append(ValueNode(owner, path, value, type_name))


def forward_targets(model: Model, iid: int, attr: AttributeDef) -> list:
    """Targets of a forward attribute of one instance, aggregates flattened fully."""
    value = model.attributes(iid)[attr.position]
    out = []
    _flatten(value, iid, (attr.position,), attr.type, out, model.schema)
    return out


def node_type(model: Model, node) -> str:
    if isinstance(node, ValueNode):
        return node.type_name
    return model.type_of(node)


def instances_of(model: Model, schema: SchemaTable, type_name: str, include_subtypes: bool = True) -> NodeSet:
    return NodeSet(model.instances_of(schema.canonical(type_name), include_subtypes))


def attribute_targets(model: Model, schema: SchemaTable, node, attr_name: str,
                      type_constraint: Optional[str] = None) -> NodeSet:
    """Nodes reached from ``node`` through ``attr_name`` (forward or inverse).

    A node whose type does not define the attribute yields an empty set.
    ``wrappedValue`` on a typed value node reaches the wrapped value.
    """
    if isinstance(node, ValueNode):
        if attr_name == "wrappedValue" and isinstance(node.value, Typed):
            out = []
            _flatten(node.value.value, node.owner, node.path + (0,), None, out, schema)
        else:
            out = []
    else:
        ent = model.type_of(node)
        a = schema.forward_attribute(ent, attr_name)
        if a is not None:
            out = forward_targets(model, node, a)
        else:
            inv = schema.inverse_attribute(ent, attr_name)
            out = model.referrers(node, inv.source, inv.attribute) if inv is not None else []
    if type_constraint is not None:
        allowed = schema.members(type_constraint)
        out = [n for n in out if node_type(model, n) in allowed]
    return NodeSet(out)


def is_subtype(schema: SchemaTable, a: str, b: str) -> bool:
    return schema.is_subtype(a, b)
