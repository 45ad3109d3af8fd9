from .ast import RuleSetAst
from .lexer import tokenize
from .parser import parse_ruleset
from .printer import format
from .transform import complete_types, desugar, expand_abbreviations, resolve


def parse(text: str, source=None) -> RuleSetAst:
    return parse_ruleset(tokenize(text, source), source)


__all__ = ["RuleSetAst", "tokenize", "parse_ruleset", "parse", "format", "desugar",
           "expand_abbreviations", "complete_types", "resolve"]
