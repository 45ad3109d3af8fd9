"""Command-line entry point: ``mvdlite validate | convert | extract``.

Exit codes: 0 success, 1 rule failures (or a failed ``--check``), 2 input
error, 3 a rule with no mvdXML form under ``--strict``, 4 extraction
integrity abort.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import (ExtractionIntegrityError, InexpressibleError, MvdLiteError)
from .engine import validate
from .engine.oracle import oracle_doc
from .extract import extract, size_report, write_partial
from .ifc.model import parse_spf, read_spf
from .ifc.schema import get_schema
from .lang import format as format_ruleset
from .lang import parse, resolve
from .mvdxml import from_mvdxml, parse_mvdxml, to_mvdxml, write_mvdxml

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INEXPRESSIBLE = 3
EXIT_INTEGRITY = 4

MVDXML_SUFFIXES = (".mvdxml", ".xml")


@dataclass
class RunConfig:
    command: str
    model_path: Optional[str] = None
    rules_path: Optional[str] = None
    schema_id: Optional[str] = None
    output: Optional[str] = None
    report_format: str = "json"
    no_cache: bool = False
    no_prune: bool = False
    epsilon: float = 0.0
    threads: Optional[int] = None
    strict: bool = False
    target: Optional[str] = None       # convert: "mvdxml" or "mvdlite"
    check_model: Optional[str] = None  # convert --check
    size_report: Optional[str] = None  # extract --report
    name: Optional[str] = None


def _err(msg: str) -> None:
    print(f"mvdlite: {msg}", file=sys.stderr)


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_model(cfg: RunConfig, path: str):
    schema = get_schema(cfg.schema_id) if cfg.schema_id else None
    return read_spf(path, schema)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate(cfg: RunConfig) -> int:
    try:
        model = _load_model(cfg, cfg.model_path)
        ast = resolve(parse(_read_text(cfg.rules_path), source=cfg.rules_path), model.schema)
    except (OSError, MvdLiteError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    report = validate(model, None, ast, cache=not cfg.no_cache, prune=not cfg.no_prune, threads=cfg.threads,
                      epsilon=cfg.epsilon, model_name=cfg.model_path, ruleset_name=cfg.rules_path, resolved=True)
    render = {"json": report.to_json, "csv": report.to_csv, "text": report.to_text}[cfg.report_format]
    out = render()
    _emit(out if out.endswith("\n") else out + "\n", cfg.output)
    return EXIT_OK if report.ok else EXIT_FAIL


def _by_rule(verdicts: dict) -> dict:
    """Key verdict maps by rule name when names are unique, else by the full key."""
    names = [k[1] for k in verdicts]
    if len(set(names)) == len(names):
        return {k[1]: v for k, v in verdicts.items()}
    return verdicts


def cmd_convert(cfg: RunConfig) -> int:
    src = cfg.rules_path
    target = cfg.target or ("mvdlite" if src.lower().endswith(MVDXML_SUFFIXES) else "mvdxml")
    try:
        text = _read_text(src)
        if target == "mvdxml":
            schema = get_schema(cfg.schema_id or "IFC4")
            ast = parse(text, source=src)
            doc = to_mvdxml(ast, schema, strict=cfg.strict, name=cfg.name or Path(src).stem)
            out = write_mvdxml(doc)
        else:
            doc = parse_mvdxml(text)
            sid = cfg.schema_id or (doc.views[0].applicable_schema if doc.views else "IFC4")
            schema = get_schema(sid)
            ast = from_mvdxml(doc, schema)
            out = format_ruleset(ast)
    except InexpressibleError as exc:
        _err(f"cannot express in mvdXML: {exc}")
        return EXIT_INEXPRESSIBLE
    except (OSError, MvdLiteError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    _emit(out, cfg.output)
    if cfg.check_model:
        try:
            model = read_spf(cfg.check_model, schema)
            if target == "mvdxml":
                before = validate(model, schema, ast).verdict_map()
                after = oracle_doc(model, schema, parse_mvdxml(out))
            else:
                before = oracle_doc(model, schema, doc)
                after = validate(model, schema, parse(out)).verdict_map()
        except (OSError, MvdLiteError) as exc:
            _err(f"--check: {exc}")
            return EXIT_INPUT
        if _by_rule(before) != _by_rule(after):
            _err("--check: verdicts differ between the input and the converted ruleset")
            return EXIT_FAIL
        print("check: verdicts preserved", file=sys.stderr)
    return EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    try:
        model = _load_model(cfg, cfg.model_path)
        ast = parse(_read_text(cfg.rules_path), source=cfg.rules_path)
        kept = extract(model, ast)
        text = write_partial(model, kept, file_name=Path(cfg.output).name if cfg.output else None)
        reparsed = parse_spf(text, model.schema, eager=True)
    except ExtractionIntegrityError as exc:
        _err(f"extraction aborted: {exc}")
        return EXIT_INTEGRITY
    except (OSError, MvdLiteError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    _emit(text, cfg.output)
    sizes = {"original": size_report(model, path=cfg.model_path),
             "extracted": size_report(reparsed, text=text)}
    rendered = json.dumps(sizes, indent=2) + "\n"
    if cfg.size_report:
        Path(cfg.size_report).write_text(rendered, encoding="utf-8")
    else:
        sys.stderr.write(rendered)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvdlite", description="Validate IFC models against MVDLite rulesets.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--schema", dest="schema_id", help="schema table id (IFC2X3, IFC4); default from the file")
        sp.add_argument("-o", "--output", help="output file (default: stdout)")

    v = sub.add_parser("validate", help="check a model against a ruleset")
    v.add_argument("model_path")
    v.add_argument("rules_path")
    common(v)
    v.add_argument("--format", dest="report_format", choices=("json", "csv", "text"), default="json")
    v.add_argument("--no-cache", action="store_true", help="disable prefix caching")
    v.add_argument("--no-prune", action="store_true", help="keep failing nodes until backtracking")
    v.add_argument("--epsilon", type=float, default=0.0, help="tolerance for real equality")
    v.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")

    c = sub.add_parser("convert", help="translate between MVDLite and mvdXML")
    c.add_argument("rules_path", metavar="input")
    common(c)
    c.add_argument("--to", dest="target", choices=("mvdxml", "mvdlite"), help="default: from the input suffix")
    c.add_argument("--strict", action="store_true", help="fail (exit 3) instead of writing marker comments")
    c.add_argument("--check", dest="check_model", metavar="MODEL", help="compare verdicts before and after")
    c.add_argument("--name", help="model view name for mvdXML output")

    e = sub.add_parser("extract", help="write the part of a model a ruleset needs")
    e.add_argument("model_path")
    e.add_argument("rules_path")
    common(e)
    e.add_argument("--report", dest="size_report", help="write the size comparison here (JSON)")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__})
    if cfg.threads is None and cfg.command == "validate":
        cfg.threads = os.cpu_count() or 1
    handler = {"validate": cmd_validate, "convert": cmd_convert, "extract": cmd_extract}[cfg.command]
    return handler(cfg)


if __name__ == "__main__":
    sys.exit(main())
