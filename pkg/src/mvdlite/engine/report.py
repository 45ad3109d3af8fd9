"""Validation reports and their JSON, CSV and text renderings."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

FORMAT_VERSION = "1.0"

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"


@dataclass
class RuleResult:
    concept: str
    rule: str
    declared_in: str
    severity: str
    text: str
    verdicts: dict                 # root id (None for global / empty) -> verdict
    seconds: float = 0.0
    visits: int = 0
    incomparable: int = 0
    inherited_from_cache: bool = False

    @property
    def key(self) -> tuple:
        return (self.concept, self.rule)

    @property
    def failed(self) -> list:
        return [r for r, v in self.verdicts.items() if v == FAIL]

    @property
    def passed(self) -> list:
        return [r for r, v in self.verdicts.items() if v == PASS]

    def to_dict(self) -> dict:
        return {
            "concept": self.concept,
            "rule": self.rule,
            "declared_in": self.declared_in,
            "severity": self.severity,
            "text": self.text,
            "seconds": round(self.seconds, 6),
            "visits": self.visits,
            "incomparable": self.incomparable,
            "summary": {PASS: len(self.passed), FAIL: len(self.failed)},
            "verdicts": [{"root": r, "verdict": v} for r, v in self.verdicts.items()],
        }


@dataclass
class ValidationReport:
    model: Optional[str]
    ruleset: Optional[str]
    schema: str
    results: list = field(default_factory=list)
    concepts: dict = field(default_factory=dict)   # concept -> sorted applicable ids
    seconds: float = 0.0
    options: dict = field(default_factory=dict)
    cache_stats: dict = field(default_factory=dict)

    format_version = FORMAT_VERSION

    @property
    def ok(self) -> bool:
        """No mandatory rule has a failing root."""
        return not any(r.failed and r.severity == "mandatory" for r in self.results)

    def verdict_map(self) -> dict:
        return {r.key: dict(r.verdicts) for r in self.results}

    def result(self, concept: str, rule: str) -> RuleResult:
        for r in self.results:
            if r.concept == concept and r.rule == rule:
                return r
        raise KeyError((concept, rule))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model": self.model,
            "ruleset": self.ruleset,
            "schema": self.schema,
            "passed": self.ok,
            "seconds": round(self.seconds, 6),
            "options": self.options,
            "cache": self.cache_stats,
            "concepts": {k: {"applicable": len(v), "roots": v} for k, v in self.concepts.items()},
            "rules": [r.to_dict() for r in self.results],
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["format_version", "concept", "rule", "severity", "root", "verdict", "seconds"])
        for r in self.results:
            for root, v in r.verdicts.items():
                w.writerow([FORMAT_VERSION, r.concept, r.rule, r.severity,
                            "" if root is None else f"#{root}", v, f"{r.seconds:.6f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"format_version {FORMAT_VERSION}",
                 f"model {self.model or '-'}  ruleset {self.ruleset or '-'}  schema {self.schema}"]
        for r in self.results:
            if list(r.verdicts.values()) == [NOT_APPLICABLE]:
                status = "N/A "
            else:
                status = "FAIL" if r.failed else "PASS"
            lines.append(f"{status} {r.concept} / {r.rule} [{r.severity}] "
                         f"pass={len(r.passed)} fail={len(r.failed)} ({r.seconds * 1000:.1f} ms)")
            if r.failed:
                shown = ", ".join("global" if x is None else f"#{x}" for x in r.failed[:20])
                more = f" (+{len(r.failed) - 20} more)" if len(r.failed) > 20 else ""
                lines.append(f"     failing: {shown}{more}")
        lines.append(f"{'PASSED' if self.ok else 'FAILED'} in {self.seconds:.3f} s")
        return "\n".join(lines) + "\n"
