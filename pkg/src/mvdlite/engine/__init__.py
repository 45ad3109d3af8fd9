"""Rule evaluation over IFC instance graphs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from ..ifc.model import Model, NodeSet, ValueNode
from ..ifc.schema import SchemaTable
from ..lang import ast as A
from .cache import PrefixCache
from .evaluator import Evaluator, Layer, Trace
from .values import Incomparable, node_value_test, type_test
from .report import FORMAT_VERSION, RuleResult, ValidationReport
from .validate import resolve_concepts, validate


@dataclass(frozen=True)
class EdgeRelation:
    """Pairs (source, target) produced by one step, with both node sets."""

    pairs: frozenset
    source_set: NodeSet
    target_set: NodeSet

    @classmethod
    def identity(cls, nodes: Iterable) -> "EdgeRelation":
        ns = NodeSet.sorted(nodes)
        return cls(frozenset((n, n) for n in ns), ns, ns)

    @classmethod
    def _from_adj(cls, sources, adj: dict) -> "EdgeRelation":
        pairs = frozenset((s, t) for t, ss in adj.items() for s in ss)
        return cls(pairs, NodeSet.sorted(sources), NodeSet.sorted(adj))


def _evaluator(model, schema, cache=None) -> Evaluator:
    ev = Evaluator(model, schema, cache=False)
    if isinstance(cache, PrefixCache):
        ev.cache = cache
    return ev


def eval_attribute(relation: EdgeRelation, seg: A.Attribute, model: Model,
                   schema: Optional[SchemaTable] = None) -> EdgeRelation:
    """Map every target of ``relation`` to its attribute targets."""
    ev = _evaluator(model, schema)
    layer = ev.eval_attribute(Layer.root(relation.target_set), seg, Trace())
    return EdgeRelation._from_adj(relation.target_set, layer.adj)


def eval_single_metric(relation: EdgeRelation, seg: A.Metric, model: Optional[Model] = None,
                       epsilon: float = 0.0) -> EdgeRelation:
    """Keep the pairs whose target passes a [Type] or [Value] test.

    ``model`` is only needed for [Type] on instance nodes.
    """
    if seg.kind not in A.SINGLE_METRICS:
        raise ValueError(f"[{seg.kind}] is not a single-node metric")
    lit = seg.values[0]

    def passes(node) -> bool:
        if seg.kind == "Type":
            name = node.type_name if isinstance(node, ValueNode) else model.type_of(node)
            return type_test(name, seg.op, lit)
        try:
            return node_value_test(node, seg.op, lit, epsilon)
        except Incomparable:
            return False

    keep = [t for t in relation.target_set if passes(t)]
    kept = set(keep)
    pairs = frozenset(p for p in relation.pairs if p[1] in kept)
    return EdgeRelation(pairs, relation.source_set, NodeSet(keep))


def eval_collection_metric(relation: EdgeRelation, attr_seg: A.Attribute, seg: A.Metric, model: Model,
                           schema: Optional[SchemaTable] = None) -> EdgeRelation:
    """Identity relation on the targets of ``relation`` whose ``attr_seg`` collection passes ``seg``."""
    ev = _evaluator(model, schema)
    tr = Trace()
    layer = ev.eval_attribute(Layer.root(relation.target_set), attr_seg, tr)
    parent = ev.eval_collection_metric(layer, seg, tr)
    return EdgeRelation.identity(parent.ok)


def eval_compound(relation: EdgeRelation, seg: A.Compound, model: Model, schema: Optional[SchemaTable] = None,
                  cache: Optional[PrefixCache] = None) -> EdgeRelation:
    """Filter (metric-ended fragments) or map (path fragments) the targets of ``relation``."""
    ev = _evaluator(model, schema, cache)
    layer = ev.eval_compound(Layer.root(relation.target_set), seg, None, Trace())
    if layer.adj is None:
        return EdgeRelation.identity(layer.ok)
    return EdgeRelation._from_adj(relation.target_set, layer.adj)


def eval_chain(root_set: Iterable, chain: A.Chain, model: Model, schema: Optional[SchemaTable] = None,
               cache: Optional[PrefixCache] = None, key: Optional[str] = None) -> NodeSet:
    """Roots with at least one surviving path through ``chain``."""
    ev = _evaluator(model, schema, cache)
    roots = set(root_set)
    return NodeSet.sorted(ev.eval_filter(chain, roots, key if ev.cache is not None else None, Trace()))


__all__ = [
    "EdgeRelation", "Evaluator", "PrefixCache", "Trace", "Layer", "FORMAT_VERSION", "RuleResult",
    "ValidationReport", "eval_attribute", "eval_single_metric", "eval_collection_metric", "eval_compound",
    "eval_chain", "resolve_concepts", "validate",
]
