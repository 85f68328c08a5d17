"""Versioned table storage for bitemporal graphs."""
from .engine import ChangeEntry, ChangeSet, GraphStore, Snapshot, Transaction, wall_clock_ms
from .schema import COLUMN, GENERAL, PER_LABEL, TABLE, SchemaConfig
from .tables import EDGE, META, PROPERTY, VERTEX, Row, Table

__all__ = [
    "ChangeEntry", "ChangeSet", "GraphStore", "Snapshot", "Transaction", "wall_clock_ms",
    "COLUMN", "GENERAL", "PER_LABEL", "TABLE", "SchemaConfig",
    "EDGE", "META", "PROPERTY", "VERTEX", "Row", "Table",
]
