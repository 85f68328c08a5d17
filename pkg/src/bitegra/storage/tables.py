"""Physical bitemporal tables.

Rows are appended and their ``tx_to`` is closed in place; nothing is ever
removed once committed.  Timestamp columns are mirrored into int64 arrays
on demand for the scan kernels.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..chronos import POS_INF, Period

VERTEX = "VERTEX"
EDGE = "EDGE"
PROPERTY = "PROPERTY"
META = "META"

# Stamp for rows written by the open transaction; above every reader horizon.
PENDING = POS_INF - 1


@dataclass(slots=True)
class Row:
    seq: int
    id: int | None
    val_from: int
    val_to: int
    tx_from: int
    tx_to: int
    label: str | None = None
    src: int | None = None
    dst: int | None = None
    key: str | None = None
    value: object = None
    cols: dict = field(default_factory=dict)

    @property
    def valid(self) -> Period:
        return Period(self.val_from, self.val_to)

    @property
    def current(self) -> bool:
        return self.tx_to == POS_INF


@dataclass
class Table:
    name: str
    kind: str
    label: str | None = None  # per-label element tables
    src_label: str | None = None
    dst_label: str | None = None
    element_table: str | None = None  # owning element table of a property table
    columns: list[str] = field(default_factory=list)  # PAC property columns
    rows: list[Row] = field(default_factory=list)

    def __post_init__(self):
        self.by_id: dict[int, list[Row]] = defaultdict(list)
        self._arrays = None

    @property
    def general(self) -> bool:
        return self.label is None

    def columns_list(self) -> list[str]:
        base = ["seq", "id"]
        if self.kind in (VERTEX, EDGE):
            base.append("label")
        if self.kind == EDGE:
            base += ["src", "dst"]
        if self.kind == PROPERTY:
            base += ["key", "value"]
        return base + list(self.columns) + ["val_from", "val_to", "tx_from", "tx_to"]

    def append(self, row: Row) -> Row:
        self.rows.append(row)
        if row.id is not None:
            self.by_id[row.id].append(row)
        self._arrays = None
        return row

    def remove(self, rows) -> None:
        """Drop uncommitted rows (rollback / same-transaction supersession)."""
        drop = {id(r) for r in rows}
        if not drop:
            return
        self.rows = [r for r in self.rows if id(r) not in drop]
        for r in rows:
            if r.id is not None:
                lst = self.by_id.get(r.id)
                if lst is not None:
                    lst[:] = [x for x in lst if id(x) not in drop]
                    if not lst:
                        del self.by_id[r.id]
        self._arrays = None

    def touch(self) -> None:
        self._arrays = None

    def add_column(self, key: str) -> None:
        if key not in self.columns:
            self.columns.append(key)

    def arrays(self):
        """(val_from, val_to, tx_from, tx_to) as int64 arrays."""
        if self._arrays is None:
            n = len(self.rows)
            a = np.empty((4, n), dtype=np.int64)
            for i, r in enumerate(self.rows):
                a[0, i] = r.val_from
                a[1, i] = r.val_to
                a[2, i] = r.tx_from
                a[3, i] = r.tx_to
            self._arrays = a
        return self._arrays

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "label": self.label,
            "src_label": self.src_label,
            "dst_label": self.dst_label,
            "element_table": self.element_table,
        }
