"""Rule identity: which constraint applies to which concept, under which name."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import ResolveError
from . import ast as A


@dataclass(frozen=True)
class RuleEntry:
    concept: str          # concept name, or the root type of a top-level rule
    name: str
    declared_in: str      # concept (or root) that declares the rule
    rule: A.RuleDef
    top: bool = False

    @property
    def key(self) -> tuple:
        return (self.concept, self.name)


def rule_name(rule: A.RuleDef, default: str) -> str:
    if rule.tags and isinstance(rule.tags.get("name"), str) and rule.tags["name"]:
        return rule.tags["name"]
    return default


def ancestors(ast: A.RuleSetAst, name: str) -> list:
    """Concept names from ``name`` up to (excluding) the root entity, nearest first."""
    by_name = {c.name: c for c in ast.concepts}
    out = []
    while name in by_name:
        if name in out:
            raise ResolveError(f"cyclic concept inheritance at {name}")
        out.append(name)
        name = by_name[name].parent
    return out


def root_entity(ast: A.RuleSetAst, name: str) -> str:
    by_name = {c.name: c for c in ast.concepts}
    seen = set()
    while name in by_name and name not in seen:
        seen.add(name)
        name = by_name[name].parent
    return name


def own_constraints(ast: A.RuleSetAst, concept: A.ConceptDef) -> list:
    return [(rule_name(r, f"{concept.name}#{k}"), r)
            for k, r in enumerate(concept.constraint_rules, 1)]


def rule_entries(ast: A.RuleSetAst) -> list:
    """Every (concept, rule) pair that receives verdicts, inherited constraints included."""
    by_name = {c.name: c for c in ast.concepts}
    out = []
    for c in ast.concepts:
        for anc in reversed(ancestors(ast, c.name)):
            for name, r in own_constraints(ast, by_name[anc]):
                out.append(RuleEntry(c.name, name, anc, r))
    counters = {}
    for t in ast.rules:
        k = counters[t.root] = counters.get(t.root, 0) + 1
        out.append(RuleEntry(t.root, rule_name(t.rule, f"{t.root}#r{k}"), t.root, t.rule, top=True))
    seen = set()
    for e in out:
        if e.key in seen:
            raise ResolveError(f"duplicate rule name {e.name!r} in {e.concept}")
        seen.add(e.key)
    return out


def default_rule_name(concept: str, k: int, top: bool = False) -> str:
    return f"{concept}#r{k}" if top else f"{concept}#{k}"


def find_entry(entries, concept: str, name: str) -> Optional[RuleEntry]:
    for e in entries:
        if e.concept == concept and e.name == name:
            return e
    return None
