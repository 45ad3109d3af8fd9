"""Ruleset validation: concept resolution, per-rule evaluation and report assembly."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from ..ifc.model import Model, NodeSet
from ..ifc.schema import SchemaTable
from ..lang import ast as A
from ..lang.printer import format_rule_expr
from ..lang.rules import RuleEntry, rule_entries
from ..lang.transform import resolve
from .evaluator import Evaluator, Trace, is_global_rule
from .report import FAIL, NOT_APPLICABLE, PASS, RuleResult, ValidationReport


def concept_key(name: str) -> str:
    return "C:" + name


def resolve_concepts(ast: A.RuleSetAst, model: Model, schema: Optional[SchemaTable] = None,
                     evaluator: Optional[Evaluator] = None, trace: Optional[Trace] = None,
                     restrict: Optional[set] = None) -> dict:
    """Applicable root set of every concept, in declaration order.

    A concept starts from its parent's set (or the entity's instances,
    subtypes included) and keeps the roots passing all its definition rules.
    ``restrict`` limits every entity base set to the given instances.
    """
    schema = schema or model.schema
    ev = evaluator or Evaluator(model, schema)
    tr = trace or Trace()
    sets = {}
    for c in ast.concepts:
        if c.parent in sets:
            cur = sets[c.parent]
        else:
            cur = set(model.instances_of(schema.canonical(c.parent)))
            if restrict is not None:
                cur &= restrict
        for k, r in enumerate(c.definition_rules):
            cur = ev.eval_rule(r.expr, cur, f"D{k}:{c.name}" if restrict is None else None, tr)
        sets[c.name] = set(cur)
    return sets


def root_set(name: str, concepts: dict, model: Model, schema: SchemaTable) -> set:
    if name in concepts:
        return concepts[name]
    return set(model.instances_of(schema.canonical(name)))


def _root_key(name: str, concepts: dict, schema: SchemaTable) -> str:
    return concept_key(name) if name in concepts else "T:" + schema.canonical(name)


def evaluate_entry(ev: Evaluator, entry: RuleEntry, concepts: dict, model: Model, schema: SchemaTable,
                   tr: Trace) -> dict:
    """Verdict map of one (concept, rule) pair."""
    expr = entry.rule.expr
    roots = root_set(entry.concept, concepts, model, schema)
    if is_global_rule(expr):
        return {None: PASS if ev.global_truth(expr, roots) else FAIL}
    if not roots:
        return {None: NOT_APPLICABLE}
    if ev.cache is not None and not entry.top:
        # the declaring concept's result, restricted to this (sub)concept
        owner = entry.declared_in
        owner_roots = concepts[owner]
        key = "R:" + owner + "\x1f" + format_rule_expr(expr)
        passing = ev.cache.get_or_compute(
            key, lambda: ev.eval_rule(expr, owner_roots, concept_key(owner), tr))
    else:
        key = _root_key(entry.concept, concepts, schema) if ev.cache is not None else None
        passing = ev.eval_rule(expr, roots, key, tr)
    return {r: (PASS if r in passing else FAIL) for r in sorted(roots)}


def validate(model: Model, schema: Optional[SchemaTable], ast: A.RuleSetAst, *, cache: bool = True,
             prune: bool = True, threads: Optional[int] = None, epsilon: float = 0.0,
             model_name: Optional[str] = None, ruleset_name: Optional[str] = None,
             resolved: bool = False) -> ValidationReport:
    """Validate ``model`` against every constraint rule of ``ast``.

    ``threads`` defaults to the number of CPU cores; rules are evaluated
    concurrently and share the prefix cache.
    """
    t0 = time.perf_counter()
    schema = schema or model.schema
    if not resolved:
        ast = resolve(ast, schema)
    ev = Evaluator(model, schema, cache=cache, prune=prune, epsilon=epsilon)
    concepts = resolve_concepts(ast, model, schema, ev)
    entries = rule_entries(ast)

    def run(entry: RuleEntry) -> RuleResult:
        tr = Trace()
        s = time.perf_counter()
        verdicts = evaluate_entry(ev, entry, concepts, model, schema, tr)
        return RuleResult(entry.concept, entry.name, entry.declared_in, entry.rule.severity,
                          format_rule_expr(entry.rule.expr), verdicts, time.perf_counter() - s,
                          tr.visits, tr.incomparable)

    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(entries) <= 1:
        results = [run(e) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, entries))
    report = ValidationReport(model_name or model.source, ruleset_name, schema.schema_id, results,
                              {k: sorted(v) for k, v in concepts.items()},
                              options={"cache": cache, "prune": prune, "threads": threads, "epsilon": epsilon})
    if ev.cache is not None:
        report.cache_stats = {"entries": len(ev.cache), "hits": ev.cache.hits, "misses": ev.cache.misses}
    report.seconds = time.perf_counter() - t0
    return report


def passing_roots(report: ValidationReport, concept: str, rule: str) -> NodeSet:
    return NodeSet(r for r in report.result(concept, rule).passed if r is not None)
