from .model import (Instance, Model, NodeSet, ValueNode, attribute_targets, instances_of, parse_spf,
                    read_spf, write_spf)
from .schema import EntityDef, SchemaTable, get_schema, is_subtype, load_schema
from .step import DERIVED, UNKNOWN, UNSET, Binary, EnumToken, Ref, Typed

__all__ = [
    "Instance", "Model", "NodeSet", "ValueNode", "attribute_targets", "instances_of", "parse_spf",
    "read_spf", "write_spf", "EntityDef", "SchemaTable", "get_schema", "is_subtype", "load_schema",
    "DERIVED", "UNKNOWN", "UNSET", "Binary", "EnumToken", "Ref", "Typed",
]
