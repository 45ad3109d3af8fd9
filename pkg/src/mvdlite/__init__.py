"""MVDLite: a compact rule language for checking IFC models, with mvdXML conversion and partial extraction."""
from .engine import ValidationReport, validate
from .engine.oracle import oracle_validate
from .extract import extract, write_partial
from .ifc import Model, SchemaTable, get_schema, load_schema, parse_spf, read_spf
from .lang import format, parse, resolve
from .mvdxml import from_mvdxml, parse_mvdxml, to_mvdxml, write_mvdxml

__version__ = "0.1.0"

__all__ = [
    "ValidationReport", "validate", "oracle_validate", "extract", "write_partial", "Model", "SchemaTable",
    "get_schema", "load_schema", "parse_spf", "read_spf", "format", "parse", "resolve", "from_mvdxml",
    "parse_mvdxml", "to_mvdxml", "write_mvdxml",
]
