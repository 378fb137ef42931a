"""Serve trained classifiers and truth tables over the audit wire protocol."""

from .schema import Column, Schema, SchemaError, identity_schema, load_schema
from .served import AdapterError, LabelCodec, ServedModel, load_served
from .server import serve, serve_stdio, serve_tcp

__all__ = [
    "AdapterError",
    "Column",
    "LabelCodec",
    "Schema",
    "SchemaError",
    "ServedModel",
    "identity_schema",
    "load_schema",
    "load_served",
    "serve",
    "serve_stdio",
    "serve_tcp",
]
