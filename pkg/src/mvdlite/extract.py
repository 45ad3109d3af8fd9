"""Partial-model extraction driven by a ruleset.

The kept set is built in three steps: the members of the selected concepts,
the forward-reference closure of what is kept, and the relationships (with
whatever they lead to) that some rule actually walks through from a kept
root.  The closure never enters a relationship by itself; a kept
relationship contributes only its singular references, and its aggregates
are filtered down to kept instances when the file is written.
"""
from __future__ import annotations

import datetime as _dt
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import ExtractionIntegrityError
from .engine.evaluator import Evaluator, Trace, is_global_rule
from .engine.validate import resolve_concepts
from .ifc.model import Model, write_records
from .ifc.schema import SchemaTable
from .ifc.step import DERIVED, UNSET, Ref, Typed, iter_refs
from .lang import ast as A
from .lang.rules import root_entity, rule_entries
from .lang.transform import resolve

RELATIONSHIP = "IfcRelationship"
ALWAYS_KEPT = ("IfcProject",)

ROOT = "root"
DEPENDENCY = "dependency"
RELATION = "relationship"


@dataclass
class ExtractionSet:
    """Kept instance ids, each with the reason it was first added."""

    kept: set = field(default_factory=set)
    kept_reasons: dict = field(default_factory=dict)

    def add(self, iid: int, reason: str) -> bool:
        if iid in self.kept:
            return False
        self.kept.add(iid)
        self.kept_reasons[iid] = reason
        return True

    def copy(self) -> "ExtractionSet":
        return ExtractionSet(set(self.kept), dict(self.kept_reasons))

    def with_reason(self, reason: str) -> set:
        return {i for i, r in self.kept_reasons.items() if r == reason}

    def __len__(self):
        return len(self.kept)

    def __contains__(self, iid):
        return iid in self.kept

    def __iter__(self):
        return iter(sorted(self.kept))


def extracted_concepts(ast: A.RuleSetAst) -> list:
    """Concepts selected for extraction: all of them unless tagged ``{"extract": false}``."""
    return [c.name for c in ast.concepts if not (c.tags and c.tags.get("extract") is False)]


class _RelTest:
    def __init__(self, schema: SchemaTable):
        self.schema = schema
        self.has = schema.is_entity(RELATIONSHIP)
        self.memo = {}

    def __call__(self, model: Model, iid: int) -> bool:
        t = model.type_of(iid)
        hit = self.memo.get(t)
        if hit is None:
            hit = self.memo[t] = self.has and self.schema.is_subtype(t, RELATIONSHIP)
        return hit


def select_roots(model: Model, schema: Optional[SchemaTable], ast: A.RuleSetAst,
                 universe: Optional[dict] = None) -> ExtractionSet:
    """Union of the resolved member sets of every extracted concept.

    ``universe`` is a precomputed concept -> member set map.
    """
    schema = schema or model.schema
    if universe is None:
        universe = resolve_concepts(resolve(ast, schema), model, schema)
    out = ExtractionSet()
    for name in extracted_concepts(ast):
        for iid in sorted(universe[name]):
            out.add(iid, ROOT)
    return out


def dependency_closure(model: Model, schema: Optional[SchemaTable], s: ExtractionSet) -> ExtractionSet:
    """Add every instance forward-referenced from the kept set, until nothing changes.

    References into relationships are not followed.  A relationship already
    in the set contributes only its singular (non-aggregate) references.
    """
    schema = schema or model.schema
    is_rel = _RelTest(schema)
    out = s.copy()
    stack = []
    for iid in s.kept:
        if is_rel(model, iid):
            attrs = model.schema.effective_attributes(model.type_of(iid))
            for a, v in zip(attrs, model.attributes(iid)):
                if not a.aggregate:
                    stack.extend(iter_refs(v))
        else:
            stack.extend(iter_refs(model.attributes(iid)))
    while stack:
        iid = stack.pop()
        if iid in out.kept or is_rel(model, iid):
            continue
        out.add(iid, DEPENDENCY)
        stack.extend(t for t in iter_refs(model.attributes(iid)) if t not in out.kept)
    return out


def rule_paths(model: Model, schema: SchemaTable, ast: A.RuleSetAst, roots: set) -> set:
    """Instances on successful paths of all definitions and constraints, starting from ``roots``.

    ``ast`` must be resolved.
    """
    ev = Evaluator(model, schema, cache=False)
    tr = Trace(provenance=True)
    concepts = resolve_concepts(ast, model, schema, ev, tr, restrict=roots)
    for e in rule_entries(ast):
        if e.concept not in concepts or is_global_rule(e.rule.expr):
            continue
        ev.eval_rule(e.rule.expr, concepts[e.concept], None, tr)
    return tr.prov


def _connected(model: Model, start: set, candidates: set) -> set:
    """Members of ``candidates`` linked to ``start`` by references (either direction) through ``candidates``."""
    pool = candidates | start
    nbr = {}
    for iid in pool:
        for r in iter_refs(model.attributes(iid)):
            if r in pool and r != iid:
                nbr.setdefault(iid, []).append(r)
                nbr.setdefault(r, []).append(iid)
    seen = set(start)
    stack = list(start)
    while stack:
        for n in nbr.get(stack.pop(), ()):
            if n not in seen:
                seen.add(n)
                stack.append(n)
    return candidates & seen


def _required_aggregate_emptied(model: Model, iid: int, kept: set) -> Optional[str]:
    attrs = model.schema.effective_attributes(model.type_of(iid))
    for a, v in zip(attrs, model.attributes(iid)):
        if a.aggregate and not a.optional and isinstance(v, tuple) and not isinstance(v, Typed):
            refs = list(iter_refs(v))
            if refs and not any(r in kept for r in refs):
                return a.name
    return None


def _admissible(model: Model, rel: int, kept: set) -> bool:
    # singular ends are pulled in by the closure; aggregates must keep a member
    return _required_aggregate_emptied(model, rel, kept) is None


def filter_relationships(model: Model, schema: Optional[SchemaTable], ast: A.RuleSetAst,
                         s: ExtractionSet, max_rounds: int = 32) -> ExtractionSet:
    """Add the relationships and nodes that rules traverse from the kept roots, then re-close.

    A relationship is kept only if each of its required aggregates keeps at
    least one member; its singular references are then added by the closure.
    Instances of an extracted concept's entity that get pulled in become roots
    themselves, and the procedure repeats until the set is stable.
    """
    schema = schema or model.schema
    ast = resolve(ast, schema)
    is_rel = _RelTest(schema)
    root_types = {schema.canonical(root_entity(ast, n)) for n in extracted_concepts(ast)}
    root_like = {}

    def is_root_like(iid):
        t = model.type_of(iid)
        hit = root_like.get(t)
        if hit is None:
            hit = root_like[t] = any(schema.is_subtype(t, r) for r in root_types)
        return hit

    cur = dependency_closure(model, schema, s)
    for _ in range(max_rounds):
        roots = cur.with_reason(ROOT)
        # collection members are recorded even when their parent fails; keep only what hangs together
        prov = _connected(model, cur.kept, rule_paths(model, schema, ast, roots) - cur.kept)
        nxt = cur.copy()
        rels = set()
        for iid in sorted(prov):
            if is_rel(model, iid):
                rels.add(iid)
            else:
                nxt.add(iid, RELATION)
        nxt = dependency_closure(model, schema, nxt)
        for r in sorted(rels):
            if r not in nxt.kept and _admissible(model, r, nxt.kept):
                nxt.add(r, RELATION)
        nxt = dependency_closure(model, schema, nxt)
        for iid in sorted(nxt.kept - roots):
            if is_root_like(iid):
                nxt.kept_reasons[iid] = ROOT
        if nxt.kept == cur.kept and nxt.with_reason(ROOT) == roots:
            return nxt
        cur = nxt
    return cur


def extract(model: Model, ast: A.RuleSetAst, schema: Optional[SchemaTable] = None) -> ExtractionSet:
    """The full three-step selection.  The project instance is always kept."""
    schema = schema or model.schema
    ast = resolve(ast, schema)
    s = select_roots(model, schema, ast)
    for ent in ALWAYS_KEPT:
        if schema.is_entity(ent):
            for iid in model.instances_of(ent):
                s.add(iid, ROOT)
    return filter_relationships(model, schema, ast, s)


# -- writing ---------------------------------------------------------------------------


def _prune_value(value, kept: set, mapping: dict):
    """(value with dropped references removed, whether anything was dropped); None if nothing is left."""
    if isinstance(value, Ref):
        if int(value) in kept:
            return Ref(mapping[int(value)]), False
        return None, True
    if isinstance(value, Typed):
        inner, dropped = _prune_value(value.value, kept, mapping)
        return (Typed(value.type_name, inner) if inner is not None else None), dropped
    if isinstance(value, tuple):
        out, dropped = [], False
        for v in value:
            nv, d = _prune_value(v, kept, mapping)
            dropped = dropped or d
            if nv is not None:
                out.append(nv)
        return tuple(out), dropped
    return value, False


def dense_numbering(kept: Iterable[int]) -> dict:
    """Old id -> new id, 1..n in old id order, as used by :func:`write_partial`."""
    return {old: i + 1 for i, old in enumerate(sorted(kept))}


def write_partial(model: Model, s, *, file_name: Optional[str] = None,
                  timestamp: Optional[str] = None) -> str:
    """Serialize the kept instances, renumbered densely.

    A dropped optional reference becomes ``$``; dropped aggregate members are
    removed and an optional aggregate left empty becomes ``$``.  A dropped
    required reference, or a required aggregate left empty, raises
    :class:`ExtractionIntegrityError` before anything is returned.
    """
    kept = set(s.kept if isinstance(s, ExtractionSet) else s)
    mapping = dense_numbering(kept)
    records = []
    for old in sorted(kept):
        ent = model.type_of(old)
        attrs = []
        for a, v in zip(model.schema.effective_attributes(ent), model.attributes(old)):
            if v is UNSET or v is DERIVED:
                attrs.append(v)
                continue
            nv, dropped = _prune_value(v, kept, mapping)
            if nv is None or (dropped and isinstance(nv, tuple) and not isinstance(nv, Typed) and not nv):
                if not a.optional:
                    raise ExtractionIntegrityError(
                        f"#{old}={ent}.{a.name} is required but none of its referenced instances were kept")
                nv = UNSET
            attrs.append(nv)
        records.append((mapping[old], ent, attrs))
    header = dict(model.header)
    fn = list(header.get("file_name", ("", "", ("",), ("",), "", "", "")))
    if file_name is not None:
        fn[0] = file_name
    fn[1] = timestamp or _dt.datetime.now().replace(microsecond=0).isoformat()
    header["file_name"] = tuple(fn)
    return write_records(header, records)


def size_report(model: Model, text: Optional[str] = None, path: Optional[str] = None) -> dict:
    """File size in bytes, element / property / shape-model counts and data lines."""
    schema = model.schema

    def count(ent):
        return len(model.instances_of(ent)) if schema.is_entity(ent) else 0

    if path is not None:
        size = os.path.getsize(path)
    elif text is not None:
        size = len(text.encode("utf-8"))
    else:
        size = len(model._text.encode("utf-8"))
    return {
        "file_size": size,
        "elements": count("IfcElement"),
        "properties": count("IfcProperty"),
        "shape_models": count("IfcShapeModel"),
        "data_lines": model.data_lines(),
    }
