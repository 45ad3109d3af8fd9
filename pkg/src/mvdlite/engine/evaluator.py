"""Nodeset evaluation of resolved MVDLite rules.

A chain is evaluated as a stack of layers.  Each attribute step pushes a layer
holding the reached nodes and, for every node, the nodes of the previous layer
it came from.  Metrics filter the top layer; a collection metric filters the
layer below the attribute it counts over and drops the attribute layer.
Backtracking from the surviving top nodes through the ``ok`` sets of each layer
gives the root nodes that have at least one complete path.

With pruning (the default) a filter removes failing nodes before the next step
expands anything; without it every traversed node stays in the layer and only
its ``ok`` flag is cleared.  Both give the same verdicts.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Optional

from ..ifc.model import Model, ValueNode, attribute_targets, forward_targets
from ..ifc.schema import SchemaTable
from ..lang import ast as A
from ..lang.printer import format_expr, format_segment
from .cache import PrefixCache
from .values import Incomparable, collection_test, node_value_test, type_test

SEP_CHAIN = "\x1f"
SEP_AND = "\x1e&"
SEP_OR = "\x1e|"
SEP_FILTER = "\x1d"


class Layer:
    """One level of an evaluated chain.  Immutable after construction."""

    __slots__ = ("nodes", "ok", "adj", "prev")

    def __init__(self, nodes: set, ok: set, adj: Optional[dict] = None, prev: Optional["Layer"] = None):
        self.nodes = nodes
        self.ok = ok
        self.adj = adj      # node -> list of source nodes in ``prev``
        self.prev = prev

    @classmethod
    def root(cls, nodes: Iterable) -> "Layer":
        s = set(nodes)
        return cls(s, s)

    def depth(self) -> int:
        d, cur = 0, self
        while cur.prev is not None:
            d, cur = d + 1, cur.prev
        return d


class Trace:
    """Per-rule counters, plus the instances on successful paths when provenance is on."""

    __slots__ = ("visits", "incomparable", "prov")

    def __init__(self, provenance: bool = False):
        self.visits = 0
        self.incomparable = 0
        self.prov = set() if provenance else None

    def record(self, nodes):
        if self.prov is not None:
            self.prov.update(n for n in nodes if not isinstance(n, ValueNode))


@lru_cache(maxsize=4096)
def _fmt(expr) -> str:
    return format_expr(expr)


@lru_cache(maxsize=4096)
def _is_filter(expr) -> bool:
    return A.is_filter(expr)


def _leaf_chains(expr, out):
    if isinstance(expr, A.Chain):
        out.append(expr)
    elif isinstance(expr, A.Not):
        _leaf_chains(expr.operand, out)
    else:
        for o in expr.operands:
            _leaf_chains(o, out)
    return out


def _ext(key: Optional[str], suffix: str) -> Optional[str]:
    return None if key is None else key + suffix


class Evaluator:
    """Evaluates resolved rule expressions against one model.

    ``cache`` memoizes chain prefixes across rules; ``prune`` drops failing
    nodes before further expansion.  Provenance recording needs ``cache=False``
    so that every successful path is actually walked.
    """

    def __init__(self, model: Model, schema: Optional[SchemaTable] = None, *, cache: bool = True,
                 prune: bool = True, epsilon: float = 0.0):
        self.model = model
        self.schema = schema or model.schema
        self.cache = PrefixCache() if cache else None
        self.prune = prune
        self.epsilon = epsilon
        self._access = {}

    # -- graph access ------------------------------------------------------------

    def _accessor(self, entity: str, attr: str):
        key = (entity, attr)
        hit = self._access.get(key)
        if hit is None:
            schema, model = self.schema, self.model
            a = schema.forward_attribute(entity, attr)
            if a is not None:
                hit = ("f", a)
            else:
                inv = schema.inverse_attribute(entity, attr)
                if inv is None:
                    hit = ("", None)
                else:
                    pairs = []
                    for e in sorted(schema.subtypes(inv.source)):
                        pos = model.attribute_position(e, inv.attribute)
                        if pos is not None:
                            pairs.append((e, pos))
                    hit = ("i", pairs)
            self._access[key] = hit
        return hit

    def targets(self, node, attr: str, allowed: Optional[frozenset]) -> list:
        model = self.model
        if isinstance(node, ValueNode):
            out = list(attribute_targets(model, self.schema, node, attr))
        else:
            kind, a = self._accessor(model.type_of(node), attr)
            if kind == "f":
                out = forward_targets(model, node, a)
            elif kind == "i":
                out = []
                for e, pos in a:
                    if e in model.type_index:
                        out.extend(model._rev_for(e, pos).get(node, ()))
            else:
                return []
        if allowed is not None:
            type_of = model.type_of
            out = [t for t in out
                   if (t.type_name if isinstance(t, ValueNode) else type_of(t)) in allowed]
        if len(out) > 1:
            out = list(dict.fromkeys(out))
        return out

    def _memo(self, key: Optional[str], fn):
        if self.cache is None or key is None:
            return fn()
        return self.cache.get_or_compute(key, fn)

    def _front(self, layer: Layer) -> set:
        return layer.ok if self.prune else layer.nodes

    def _filtered(self, layer: Layer, passing: set) -> Layer:
        if self.prune:
            return Layer(passing, passing, layer.adj, layer.prev)
        return Layer(layer.nodes, layer.ok & passing, layer.adj, layer.prev)

    # -- segments ----------------------------------------------------------------

    def eval_attribute(self, layer: Layer, seg: A.Attribute, tr: Trace) -> Layer:
        allowed = self.schema.members(seg.type) if seg.type else None
        adj = {}
        visits = 0
        for n in self._front(layer):
            visits += 1
            for t in self.targets(n, seg.name, allowed):
                srcs = adj.get(t)
                if srcs is None:
                    adj[t] = [n]
                else:
                    srcs.append(n)
        tr.visits += visits
        nodes = set(adj)
        return Layer(nodes, nodes, adj, layer)

    def test_single(self, node, seg: A.Metric, tr: Trace) -> bool:
        lit = seg.values[0]
        if seg.kind == "Type":
            t = node.type_name if isinstance(node, ValueNode) else self.model.type_of(node)
            return type_test(t, seg.op, lit)
        try:
            return node_value_test(node, seg.op, lit, self.epsilon)
        except Incomparable:
            tr.incomparable += 1
            return False

    def eval_single_metric(self, layer: Layer, seg: A.Metric, tr: Trace) -> Layer:
        front = self._front(layer)
        tr.visits += len(front)
        passing = {n for n in front if self.test_single(n, seg, tr)}
        return self._filtered(layer, passing)

    def eval_collection_metric(self, layer: Layer, seg: A.Metric, tr: Trace) -> Layer:
        """Filter the parents of ``layer`` by the size/existence/uniqueness of their targets."""
        parent = layer.prev
        members = {}
        for t, srcs in layer.adj.items():
            for s in srcs:
                members.setdefault(s, []).append(t)
        front = self._front(parent)
        tr.visits += len(front)
        lit = seg.values[0]
        passing = set()
        for p in front:
            coll = members.get(p, ())
            if tr.prov is not None and coll:
                tr.record(coll)
            if collection_test(seg.kind, seg.op, lit, coll):
                passing.add(p)
        return self._filtered(parent, passing)

    def eval_compound(self, layer: Layer, seg: A.Compound, key: Optional[str], tr: Trace) -> Layer:
        front = self._front(layer)
        if _is_filter(seg.expr):
            return self._filtered(layer, self.eval_filter(seg.expr, front, key, tr))
        rel = self.eval_mapping(seg.expr, front, key, tr)
        adj = {}
        for n, ts in rel.items():
            for t in ts:
                adj.setdefault(t, []).append(n)
        nodes = set(adj)
        return Layer(nodes, nodes, adj, layer)

    # -- chains ---------------------------------------------------------------------

    def eval_chain(self, chain: A.Chain, layer: Layer, key: Optional[str], tr: Trace) -> Layer:
        """Apply every segment of ``chain`` to ``layer``; ``key`` names ``layer`` in the cache."""
        for seg in chain.segments:
            nkey = _ext(key, format_segment(seg))
            layer = self._memo(nkey, lambda layer=layer, seg=seg, key=key: self._apply(layer, seg, key, tr))
            key = nkey
        return layer

    def _apply(self, layer: Layer, seg, key, tr: Trace) -> Layer:
        if isinstance(seg, A.Attribute):
            return self.eval_attribute(layer, seg, tr)
        if isinstance(seg, A.Metric):
            if seg.is_collection:
                return self.eval_collection_metric(layer, seg, tr)
            return self.eval_single_metric(layer, seg, tr)
        if isinstance(seg, A.Compound):
            return self.eval_compound(layer, seg, key, tr)
        raise TypeError(f"unresolved segment {seg!r}")

    def backtrack(self, layer: Layer, tr: Trace) -> set:
        """Root nodes with a complete path to a surviving node of ``layer``."""
        alive = layer.ok
        while layer.prev is not None:
            tr.record(alive)
            prev_ok = layer.prev.ok
            adj = layer.adj
            nxt = set()
            for t in alive:
                for s in adj[t]:
                    if s in prev_ok:
                        nxt.add(s)
            alive = nxt
            layer = layer.prev
            if not alive:
                break
        tr.record(alive)
        return alive

    # -- compounds ---------------------------------------------------------------------

    def eval_filter(self, expr, nodes: set, key: Optional[str], tr: Trace) -> set:
        """Subset of ``nodes`` satisfying a filter expression (or path existence)."""
        if not nodes:
            return set()
        if isinstance(expr, A.Chain):
            if not expr.segments:
                return set(nodes)
            return self._memo(_ext(key, SEP_FILTER + _fmt(expr)),
                              lambda: self.backtrack(
                                  self.eval_chain(expr, Layer.root(nodes), _ext(key, SEP_CHAIN), tr), tr))
        if isinstance(expr, A.Not):
            return set(nodes) - self.eval_filter(expr.operand, nodes, key, tr)
        ops = expr.operands
        if isinstance(expr, A.And):
            if not self.prune:
                out = set(nodes)
                for op in ops:
                    out &= self.eval_filter(op, nodes, key, tr)
                return out
            out = set(nodes)
            for i, op in enumerate(ops):
                sub = key if i == 0 else _ext(key, SEP_AND + " AND ".join(_fmt(o) for o in ops[:i]))
                out = self.eval_filter(op, out, sub, tr)
                if not out:
                    break
            return out
        if isinstance(expr, A.Or):
            if not self.prune:
                out = set()
                for op in ops:
                    out |= self.eval_filter(op, nodes, key, tr)
                return out
            out, rest = set(), set(nodes)
            for i, op in enumerate(ops):
                sub = key if i == 0 else _ext(key, SEP_OR + " OR ".join(_fmt(o) for o in ops[:i]))
                got = self.eval_filter(op, rest, sub, tr)
                out |= got
                rest = rest - got
                if not rest:
                    break
            return out
        if isinstance(expr, A.Xor):
            out = set()
            for op in ops:
                out ^= self.eval_filter(op, nodes, key, tr)
            return out
        raise TypeError(expr)

    def chain_relation(self, chain: A.Chain, nodes: set, key: Optional[str], tr: Trace) -> dict:
        """input node -> set of nodes reached by ``chain`` (restricted to surviving paths)."""
        top = self.eval_chain(chain, Layer.root(nodes), _ext(key, SEP_CHAIN), tr)
        if tr.prov is not None:
            self.backtrack(top, tr)
        stack = []
        layer = top
        while layer.prev is not None:
            stack.append(layer)
            layer = layer.prev
        origin = {n: (n,) for n in layer.ok}
        for layer in reversed(stack):
            new = {}
            for t in layer.ok:
                acc = set()
                for s in layer.adj[t]:
                    o = origin.get(s)
                    if o is not None:
                        acc.update(o)
                if acc:
                    new[t] = acc
            origin = new
        rel = {}
        for t, os in origin.items():
            for o in os:
                rel.setdefault(o, set()).add(t)
        return rel

    def eval_mapping(self, expr, nodes: set, key: Optional[str], tr: Trace) -> dict:
        """input node -> target set for a compound of path fragments."""
        leaves = _leaf_chains(expr, [])
        rels = {}
        for c in leaves:
            if c not in rels:
                rels[c] = self.chain_relation(c, nodes, key, tr)
        universe = {}
        for r in rels.values():
            for n, ts in r.items():
                universe.setdefault(n, set()).update(ts)

        def go(e) -> dict:
            if isinstance(e, A.Chain):
                return rels[e]
            if isinstance(e, A.Not):
                inner = go(e.operand)
                out = {}
                for n, u in universe.items():
                    d = u - inner.get(n, set())
                    if d:
                        out[n] = d
                return out
            parts = [go(o) for o in e.operands]
            out = {}
            if isinstance(e, A.And):
                for n, ts in parts[0].items():
                    acc = set(ts)
                    for p in parts[1:]:
                        acc &= p.get(n, set())
                        if not acc:
                            break
                    if acc:
                        out[n] = acc
            elif isinstance(e, A.Or):
                for p in parts:
                    for n, ts in p.items():
                        out.setdefault(n, set()).update(ts)
            else:
                for p in parts:
                    for n, ts in p.items():
                        out[n] = out.get(n, set()) ^ ts
                out = {n: ts for n, ts in out.items() if ts}
            return out

        return go(expr)

    # -- rules ------------------------------------------------------------------------------

    def global_truth(self, expr, roots) -> bool:
        """Truth of a global rule: collection metrics over the whole root set."""
        if isinstance(expr, A.Chain):
            seg = expr.segments[0]
            return collection_test(seg.kind, seg.op, seg.values[0], roots)
        if isinstance(expr, A.Not):
            return not self.global_truth(expr.operand, roots)
        vals = [self.global_truth(o, roots) for o in expr.operands]
        if isinstance(expr, A.And):
            return all(vals)
        if isinstance(expr, A.Or):
            return any(vals)
        return sum(vals) % 2 == 1

    def eval_rule(self, expr, roots: set, key: Optional[str], tr: Trace) -> set:
        """Roots satisfying a (non-global) rule's root-level expression."""
        return self.eval_filter(expr, set(roots), key, tr)


def is_global_rule(expr) -> bool:
    chains = _leaf_chains(expr, [])
    return bool(chains) and all(c.segments and isinstance(c.segments[0], A.Metric)
                                and c.segments[0].is_collection for c in chains)
