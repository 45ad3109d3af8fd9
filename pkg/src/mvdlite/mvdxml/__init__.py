"""Conversion between MVDLite and mvdXML V1.1."""
from .doc import MvdXmlDoc, parse_mvdxml, write_mvdxml
from .export import to_mvdxml
from .importer import from_mvdxml
from .statement import format_statement, parse_statement

__all__ = ["MvdXmlDoc", "parse_mvdxml", "write_mvdxml", "to_mvdxml", "from_mvdxml", "parse_statement",
           "format_statement"]
