"""Graph store: modification API, commits, snapshots and scans."""
from __future__ import annotations

import threading
import time
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field, replace as _dc_replace
from datetime import datetime
from typing import Callable, Iterable, Iterator

import numpy as np

from .. import _kernels
from ..chronos import ALWAYS, NEG_INF, POS_INF, Period, TimeDomain, Timestamp, contains, from_datetime
from ..errors import (
    DuplicateId,
    InvalidPeriod,
    PlacementError,
    ReferentialViolation,
    TransactionError,
    TypeMismatch,
    UnknownElement,
    UnknownEndpoint,
    ConstraintViolation,
)
from ..graph_model import (
    EdgeVersion,
    ElementKind,
    PropertyVersion,
    VertexVersion,
    check_integrity,
    value_tag,
)
from . import durability
from .schema import (
    COLUMN,
    EDGE_TABLE,
    GENERAL,
    META_TABLE,
    PER_LABEL,
    TABLE,
    VERTEX_TABLE,
    SchemaConfig,
    edge_table_name,
    property_table_name,
    vertex_table_name,
)
from .tables import EDGE, META, PENDING, PROPERTY, VERTEX, Row, Table

_KIND = {VERTEX: ElementKind.VERTEX, EDGE: ElementKind.EDGE}


def wall_clock_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass(frozen=True)
class ChangeEntry:
    op: str  # INSERT | CLOSE
    table: str
    row: dict
    identity: tuple  # ("vertex", id) | ("edge", id) | ("property", owner, key) | ("meta",)


@dataclass
class ChangeSet:
    graph: str
    commit_time: int | None
    entries: list[ChangeEntry] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def data_entries(self) -> list[ChangeEntry]:
        return [e for e in self.entries if e.identity[0] != "meta"]

    def touched_tables(self) -> set[str]:
        return {e.table for e in self.data_entries()}

    def changed_elements(self) -> list[tuple]:
        """(element id, kind, op) for every data entry, properties mapped to owners."""
        out = []
        for e in self.data_entries():
            ident = e.identity
            if ident[0] == "property":
                out.append((ident[1], "property", e.op))
            else:
                out.append((ident[1], ident[0], e.op))
        return out


def row_image(table: Table, row: Row) -> dict:
    return {
        "table": table.name,
        "seq": row.seq,
        "id": row.id,
        "label": row.label,
        "src": row.src,
        "dst": row.dst,
        "key": row.key,
        "value": row.value,
        "columns": dict(row.cols) if table.kind != META else {},
        "meta": dict(row.cols) if table.kind == META else None,
        "val_from": row.val_from,
        "val_to": row.val_to,
        "tx_from": row.tx_from,
        "tx_to": row.tx_to,
    }


def _identity(table: Table, row: Row) -> tuple:
    if table.kind == VERTEX:
        return ("vertex", row.id)
    if table.kind == EDGE:
        return ("edge", row.id)
    if table.kind == PROPERTY:
        return ("property", row.id, row.key)
    return ("meta",)


def _coerce_value(value):
    if isinstance(value, datetime):
        return Timestamp(from_datetime(value))
    value_tag(value)
    return value


def _same_value(a, b) -> bool:
    return value_tag(a) == value_tag(b) and a == b


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


class _LogicalElements:
    """Coalesced element versions of one table as seen at a horizon."""

    def __init__(self, table: Table, horizon: int):
        self.kind = table.kind
        self.versions: list = []
        self.order: list[int] = []
        self.by_id: dict[int, list[int]] = defaultdict(list)
        self.by_src: dict[int, list[int]] = defaultdict(list)
        self.by_dst: dict[int, list[int]] = defaultdict(list)
        # column property versions: key -> owner -> [PropertyVersion]
        self.columns: dict[str, dict[int, list[PropertyVersion]]] = defaultdict(lambda: defaultdict(list))

        rows = table.rows
        if rows:
            a = table.arrays()
            eff = _kernels.horizon_ends(a[2], a[3], horizon)
            live = np.flatnonzero(a[2] < eff)
        else:
            eff, live = (), ()
        groups: dict[int, list[tuple[Row, int]]] = {}
        for i in live:
            r = rows[i]
            groups.setdefault(r.id, []).append((r, int(eff[i])))
        owner_kind = _KIND[table.kind]
        for eid, items in groups.items():
            items.sort(key=lambda x: (x[0].tx_from, x[0].seq))
            merged: list[list] = []  # [row, tx_from, tx_to]
            for r, end in items:
                if merged:
                    last = merged[-1]
                    lr = last[0]
                    if (last[2] == r.tx_from and lr.label == r.label and lr.src == r.src
                            and lr.dst == r.dst and lr.val_from == r.val_from and lr.val_to == r.val_to):
                        last[2] = end
                        continue
                merged.append([r, r.tx_from, end])
            for r, s, e in merged:
                valid = Period(r.val_from, r.val_to)
                if self.kind == VERTEX:
                    v = VertexVersion(eid, r.label, valid, Period(s, e))
                else:
                    v = EdgeVersion(eid, r.label, r.src, r.dst, valid, Period(s, e))
                idx = len(self.versions)
                self.versions.append(v)
                self.order.append(r.seq)
                self.by_id[eid].append(idx)
                if self.kind == EDGE:
                    self.by_src[r.src].append(idx)
                    self.by_dst[r.dst].append(idx)
            for key in table.columns:
                self.columns[key][eid] = _coalesce_props(
                    ((r.cols[key], r.valid, r.tx_from, end, r.seq) for r, end in items if key in r.cols),
                    eid, owner_kind, key,
                )
        n = len(self.versions)
        self.tx = np.array([[v.tx.start, v.tx.end] for v in self.versions], dtype=np.int64).reshape(n, 2)
        self.val = np.array([[v.valid.start, v.valid.end] for v in self.versions], dtype=np.int64).reshape(n, 2)

    def window(self, lo: int, hi: int) -> np.ndarray:
        if not self.versions:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(_kernels.window_mask(self.tx[:, 0], self.tx[:, 1], lo, hi))


def _coalesce_props(items: Iterable, owner: int, kind: ElementKind, key: str) -> list[PropertyVersion]:
    """Merge tx-contiguous runs with identical (value, valid) into one version."""
    items = sorted(items, key=lambda x: (x[2], x[4]))
    open_: dict[tuple, list] = {}
    runs: list[list] = []
    for value, valid, s, e, _seq in items:
        if s >= e:
            continue
        pk = (value_tag(value), value, valid)
        cur = open_.get(pk)
        if cur is not None and cur[3] == s:
            cur[3] = e
            continue
        run = [value, valid, s, e]
        open_[pk] = run
        runs.append(run)
    return [PropertyVersion(owner, kind, key, v, valid, Period(s, e)) for v, valid, s, e in runs]


class Snapshot:
    """Read view of a graph at a commit horizon.

    Everything committed at or before ``horizon`` is visible; closures made
    later read as still open.  Instances are immutable and may be shared.
    """

    def __init__(self, store: "GraphStore", horizon: int):
        self.store = store
        self.horizon = horizon
        self._elements: dict[str, _LogicalElements] = {}
        self._props: dict[str, dict[tuple, list[PropertyVersion]]] = {}
        self._lock = threading.Lock()

    # -- logical tables --------------------------------------------------------

    def _logical(self, name: str) -> _LogicalElements:
        le = self._elements.get(name)
        if le is None:
            with self._lock, self.store._lock:
                le = self._elements.get(name)
                if le is None:
                    le = _LogicalElements(self.store.tables[name], self.horizon)
                    self._elements[name] = le
        return le

    def _prop_table(self, name: str) -> dict[tuple, list[PropertyVersion]]:
        pt = self._props.get(name)
        if pt is None:
            with self._lock, self.store._lock:
                pt = self._props.get(name)
                if pt is None:
                    pt = self._build_props(self.store.tables[name])
                    self._props[name] = pt
        return pt

    def _build_props(self, table: Table) -> dict[tuple, list[PropertyVersion]]:
        rows = table.rows
        out: dict[tuple, list[PropertyVersion]] = {}
        if not rows:
            return out
        a = table.arrays()
        eff = _kernels.horizon_ends(a[2], a[3], self.horizon)
        groups: dict[tuple, list] = {}
        for i in np.flatnonzero(a[2] < eff):
            r = rows[i]
            groups.setdefault((r.id, r.key), []).append((r.value, r.valid, r.tx_from, int(eff[i]), r.seq))
        owner_table = self.store.tables.get(table.element_table)
        kind = _KIND[owner_table.kind] if owner_table is not None else ElementKind.VERTEX
        for (owner, key), items in groups.items():
            out[(owner, key)] = _coalesce_props(items, owner, kind, key)
        return out

    # -- element access ---------------------------------------------------------

    def elements(self, tables: Iterable[tuple[str, bool]], labels, window: tuple[int, int]) -> list:
        """Element versions of ``tables`` overlapping ``window`` in insertion order.

        ``tables`` holds ``(name, filter_label)`` pairs; general tables need
        the label filter, per-label tables do not.
        """
        found = []
        for name, need_filter in tables:
            if name not in self.store.tables:
                continue
            le = self._logical(name)
            for i in le.window(*window):
                v = le.versions[i]
                if need_filter and labels is not None and v.label not in labels:
                    continue
                found.append((le.order[i], v.tx.start, v))
        found.sort(key=lambda x: (x[0], x[1]))
        return [v for _, _, v in found]

    def versions_of(self, eid: int, window: tuple[int, int]) -> list:
        loc = self.store.location.get(eid)
        if loc is None:
            return []
        le = self._logical(loc[1].name)
        lo, hi = window
        return [le.versions[i] for i in le.by_id.get(eid, ())
                if le.versions[i].tx.start < hi and le.versions[i].tx.end > lo]

    def adjacent_edges(self, vid: int, direction: str, tables, labels, window) -> list[EdgeVersion]:
        """Edges leaving (``OUT``) or entering (``IN``) vertex ``vid``."""
        lo, hi = window
        found = []
        for name, need_filter in tables:
            if name not in self.store.tables:
                continue
            le = self._logical(name)
            index = le.by_src if direction == "OUT" else le.by_dst
            for i in index.get(vid, ()):
                v = le.versions[i]
                if not (v.tx.start < hi and v.tx.end > lo):
                    continue
                if need_filter and labels is not None and v.label not in labels:
                    continue
                found.append((le.order[i], v.tx.start, v))
        found.sort(key=lambda x: (x[0], x[1]))
        return [v for _, _, v in found]

    def property_versions(self, owner: int, key: str, window: tuple[int, int]) -> list[PropertyVersion]:
        loc = self.store.location.get(owner)
        if loc is None:
            return []
        kind, table = loc
        label = self.store.label_of.get(owner)
        placement = self.store.prop_placements.get((kind, label, key))
        if placement is None:
            return []
        if placement == COLUMN:
            versions = self._logical(table.name).columns.get(key, {}).get(owner, [])
        else:
            pname = property_table_name(table.name)
            if pname not in self.store.tables:
                return []
            versions = self._prop_table(pname).get((owner, key), [])
        lo, hi = window
        out = [p for p in versions if p.tx.start < hi and p.tx.end > lo]
        out.sort(key=lambda p: (p.valid.start, p.valid.end, p.tx.start))
        return out

    def property_keys(self, owner: int) -> list[str]:
        loc = self.store.location.get(owner)
        if loc is None:
            return []
        kind, _ = loc
        label = self.store.label_of.get(owner)
        return sorted(k for (kd, lb, k) in self.store.prop_placements if kd == kind and lb == label)

    def all_versions(self):
        """All (vertices, edges, properties) logical versions."""
        vs, es, ps = [], [], []
        for name, t in list(self.store.tables.items()):
            if t.kind == VERTEX:
                le = self._logical(name)
                vs += le.versions
            elif t.kind == EDGE:
                le = self._logical(name)
                es += le.versions
            else:
                continue
            for owners in le.columns.values():
                for lst in owners.values():
                    ps += lst
        for name, t in list(self.store.tables.items()):
            if t.kind == PROPERTY:
                for lst in self._prop_table(name).values():
                    ps += lst
        return vs, es, ps


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------


class GraphStore:
    """One bitemporal graph and its relational catalog."""

    def __init__(self, name: str, config: SchemaConfig | None = None,
                 clock: Callable[[], int] | None = None, log_path=None, verify: bool = True):
        self.name = name
        self.config = config or SchemaConfig()
        self.clock = clock or wall_clock_ms
        self.verify = verify
        self.tables: dict[str, Table] = {}
        self.tables[META_TABLE] = Table(META_TABLE, META)
        self.elem_placements: dict[tuple[str, str], str] = {}
        self.prop_placements: dict[tuple[str, str, str], str] = {}
        self.location: dict[int, tuple[str, Table]] = {}
        self.label_of: dict[int, str] = {}
        self.incident: dict[int, set[int]] = defaultdict(set)
        self.value_tags: dict[tuple[int, str], str] = {}
        self.seq = 0
        self.next_id = 1
        self.last_commit = NEG_INF
        self.commits: list[int] = []
        self.listeners: list[Callable] = []
        self.listener_errors: list[tuple[int, BaseException]] = []
        self.catalog_version = 0
        self._lock = threading.RLock()
        self._writer = threading.Lock()
        self._writer_thread = None
        self._tx: Transaction | None = None
        self._snapshots: OrderedDict[int, Snapshot] = OrderedDict()
        self._log = durability.GraphLog(log_path) if log_path else None

    # -- catalog ---------------------------------------------------------------

    @property
    def catalog(self) -> dict[str, Table]:
        return self.tables

    def _materialize_initial(self) -> None:
        """Create the tables implied by the configuration alone."""
        tx = self.begin()
        try:
            if self.config.default_element == GENERAL or GENERAL in self.config.elements.values():
                tx._table(VERTEX_TABLE, VERTEX)
                tx._table(EDGE_TABLE, EDGE)
            for label, p in self.config.elements.items():
                if p == PER_LABEL:
                    tx._element_table(VERTEX, label)
            if self.config.default_property == TABLE:
                for name in (VERTEX_TABLE, EDGE_TABLE):
                    if name in self.tables:
                        tx._prop_table(self.tables[name])
            for name in [n for n, t in self.tables.items() if t.kind == VERTEX and not t.general]:
                if self.config.default_property == TABLE:
                    tx._prop_table(self.tables[name])
            tx._commit_meta_only()
        except BaseException:
            tx.abort()
            raise

    def element_placement(self, kind: str, label: str) -> str:
        return self.elem_placements.get((kind, label)) or self.config.element_placement(label)

    def tables_for(self, kind: str, labels=None, src_labels=None, dst_labels=None) -> list[tuple[str, bool]]:
        """Resolve a (kind, label set) selector to ``(table, needs_label_filter)``."""
        out: list[tuple[str, bool]] = []
        seen = set()

        def add(name, flt):
            if name in self.tables and name not in seen:
                seen.add(name)
                out.append((name, flt))

        general = VERTEX_TABLE if kind == VERTEX else EDGE_TABLE
        if labels is None:
            add(general, False)
            for name, t in self.tables.items():
                if t.kind == kind and not t.general:
                    if kind == EDGE and not _edge_table_matches(t, src_labels, dst_labels):
                        continue
                    add(name, False)
            return out
        for label in labels:
            if self.element_placement(kind, label) == GENERAL:
                add(general, True)
            else:
                for name, t in self.tables.items():
                    if t.kind == kind and t.label == label:
                        if kind == EDGE and not _edge_table_matches(t, src_labels, dst_labels):
                            continue
                        add(name, False)
        return out

    # -- transactions ----------------------------------------------------------

    def begin(self) -> "Transaction":
        me = threading.get_ident()
        if self._writer_thread == me:
            raise TransactionError("a transaction is already open in this thread")
        self._writer.acquire()
        self._writer_thread = me
        self._tx = Transaction(self)
        return self._tx

    def transaction(self) -> "Transaction":
        return self.begin()

    def _release(self) -> None:
        self._tx = None
        self._writer_thread = None
        self._writer.release()

    def _next_commit_time(self) -> int:
        t = int(self.clock())
        if t <= self.last_commit:
            t = self.last_commit + 1
        return t

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq

    # -- reads -----------------------------------------------------------------

    def snapshot(self, horizon: int | None = None) -> Snapshot:
        h = self.last_commit if horizon is None else horizon
        with self._lock:
            snap = self._snapshots.get(h)
            if snap is None:
                snap = Snapshot(self, h)
                self._snapshots[h] = snap
                while len(self._snapshots) > 8:
                    self._snapshots.popitem(last=False)
            else:
                self._snapshots.move_to_end(h)
            return snap

    def invalidate(self) -> None:
        """Drop cached snapshots after direct table manipulation."""
        with self._lock:
            self._snapshots.clear()
            for t in self.tables.values():
                t.touch()

    def scan(self, kind: str, label: str | None = None, tx=None, valid: Period | None = None,
             horizon: int | None = None) -> Iterator[dict]:
        """Physical rows of the element tables selected by ``(kind, label)``.

        ``tx`` is an instant (point mode) or a :class:`Period` (range mode);
        ``None`` means the latest committed instant.
        """
        h = self.last_commit if horizon is None else horizon
        if tx is None:
            tx = h
        lo, hi = (tx.start, tx.end) if isinstance(tx, Period) else (tx, tx + 1)
        vlo, vhi = (valid.start, valid.end) if valid is not None else (NEG_INF, POS_INF)
        labels = None if label is None else (label,)
        with self._lock:
            for name, flt in self.tables_for(kind, labels):
                table = self.tables[name]
                if not table.rows:
                    continue
                a = table.arrays()
                eff = _kernels.horizon_ends(a[2], a[3], h)
                mask = _kernels.bitemporal_mask(a[2], eff, lo, hi, a[0], a[1], vlo, vhi)
                for i in np.flatnonzero(mask):
                    r = table.rows[i]
                    if flt and r.label != label:
                        continue
                    img = row_image(table, r)
                    img["tx_to"] = int(eff[i])
                    yield img

    def integrity(self, domain: TimeDomain, horizon: int | None = None):
        vs, es, ps = self.snapshot(horizon).all_versions()
        return check_integrity(vs, es, ps, domain)

    # -- durability ------------------------------------------------------------

    def replay(self, entries: Iterable[dict]) -> None:
        by_seq: dict[int, tuple[Table, Row]] = {}
        for t in self.tables.values():
            for r in t.rows:
                by_seq[r.seq] = (t, r)
        for e in entries:
            if e["op"] == "INSERT":
                if e["table"] == META_TABLE:
                    self._apply_meta(e["meta"])
                table = self.tables[e["table"]]
                row = Row(e["seq"], e["id"], e["val_from"], e["val_to"], e["tx_from"], e["tx_to"],
                          e["label"], e["src"], e["dst"], e["key"], e["value"],
                          dict(e["meta"] if table.kind == META else e["columns"]))
                table.append(row)
                by_seq[row.seq] = (table, row)
                self._index_row(table, row)
                self.seq = max(self.seq, row.seq)
                if row.tx_from < PENDING and table.kind != META:
                    self.last_commit = max(self.last_commit, row.tx_from)
            else:
                table, row = by_seq[e["seq"]]
                row.tx_to = e["tx_to"]
                table.touch()
                self.last_commit = max(self.last_commit, row.tx_to)
        self.commits = sorted({r.tx_from for t in self.tables.values() for r in t.rows
                               if t.kind != META} | {r.tx_to for t in self.tables.values()
                                                    for r in t.rows if r.tx_to < POS_INF})
        self.invalidate()

    def _apply_meta(self, m: dict) -> None:
        obj = m["object"]
        if obj == "table":
            if m["name"] not in self.tables:
                self.tables[m["name"]] = Table(m["name"], m["kind"], m.get("label"), m.get("src_label"),
                                               m.get("dst_label"), m.get("element_table"))
        elif obj == "element":
            self.elem_placements[(m["kind"], m["label"])] = m["placement"]
        elif obj == "property":
            self.prop_placements[(m["kind"], m["label"], m["key"])] = m["placement"]
            if m["placement"] == COLUMN and m.get("table") in self.tables:
                self.tables[m["table"]].add_column(m["key"])
        elif obj == "column":
            self.tables[m["table"]].add_column(m["key"])
        self.catalog_version += 1

    def _index_row(self, table: Table, row: Row) -> None:
        if table.kind in (VERTEX, EDGE):
            self.location[row.id] = (table.kind, table)
            self.label_of[row.id] = row.label
            self.next_id = max(self.next_id, row.id + 1)
            if table.kind == EDGE:
                self.incident[row.src].add(row.id)
                self.incident[row.dst].add(row.id)
            for k, v in row.cols.items():
                self.value_tags.setdefault((row.id, k), value_tag(v))
        elif table.kind == PROPERTY:
            self.value_tags.setdefault((row.id, row.key), value_tag(row.value))

    def schema_config_from_meta(self) -> SchemaConfig:
        """Rebuild the placement decisions recorded in the metadata table."""
        elements, props = {}, {}
        for r in self.tables[META_TABLE].rows:
            m = r.cols
            if m.get("object") == "element":
                elements[m["label"]] = m["placement"]
            elif m.get("object") == "property":
                props[f"{m['label']}.{m['key']}"] = m["placement"]
        return SchemaConfig(elements, props, self.config.default_element, self.config.default_property)


def _edge_table_matches(t: Table, src_labels, dst_labels) -> bool:
    if src_labels is not None and t.src_label not in src_labels:
        return False
    if dst_labels is not None and t.dst_label not in dst_labels:
        return False
    return True


# ---------------------------------------------------------------------------
# transactions
# ---------------------------------------------------------------------------


class Transaction:
    """The single open write transaction of a :class:`GraphStore`.

    Changes are applied to the tables immediately but stamped ``PENDING``
    so readers cannot see them; :meth:`commit` assigns the commit instant.
    """

    def __init__(self, store: GraphStore):
        self.store = store
        self.state = "OPEN"
        self._ops: list[tuple[str, Table, Row]] = []  # (INSERT|CLOSE, table, row)
        self._inserted: dict[int, tuple[Table, Row]] = {}
        self._created_tables: list[str] = []
        self._placements: list[tuple[dict, tuple]] = []
        self._columns: list[tuple[Table, str]] = []  # columns this transaction added
        self._ids: list[int] = []
        self._tags: list[tuple[int, str]] = []
        self._next_id0 = store.next_id
        self._seq0 = store.seq

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if self.state != "OPEN":
            return False
        if exc_type is None:
            self.commit()
        else:
            self.abort()
        return False

    def _check_open(self):
        if self.state != "OPEN":
            raise TransactionError(f"transaction is {self.state}")

    # -- low-level row ops -----------------------------------------------------

    def _insert(self, table: Table, row: Row) -> Row:
        table.append(row)
        self._inserted[id(row)] = (table, row)
        self._ops.append(("INSERT", table, row))
        return row

    def _close(self, table: Table, row: Row) -> None:
        if row.tx_from == PENDING:
            # superseded within the same transaction: the version never existed
            table.remove([row])
            del self._inserted[id(row)]
            self._ops = [op for op in self._ops if op[2] is not row]
            return
        row.tx_to = PENDING
        table.touch()
        self._ops.append(("CLOSE", table, row))

    def _replace(self, table: Table, row: Row, **changes) -> Row:
        if row.tx_from == PENDING:
            for k, v in changes.items():
                setattr(row, k, v)
            table.touch()
            return row
        new = _dc_replace(row, seq=self.store._next_seq(), tx_from=PENDING, tx_to=POS_INF,
                          cols=dict(changes.pop("cols", row.cols)))
        for k, v in changes.items():
            setattr(new, k, v)
        self._close(table, row)
        return self._insert(table, new)

    def _meta(self, **m) -> None:
        row = Row(self.store._next_seq(), None, NEG_INF, POS_INF, PENDING, POS_INF, cols=m)
        self._insert(self.store.tables[META_TABLE], row)
        self.store.catalog_version += 1

    def _table(self, name: str, kind: str, **attrs) -> Table:
        t = self.store.tables.get(name)
        if t is None:
            t = Table(name, kind, **attrs)
            self.store.tables[name] = t
            self._created_tables.append(name)
            self._meta(object="table", **t.describe())
        return t

    def _element_table(self, kind: str, label: str, src_label=None, dst_label=None) -> Table:
        store = self.store
        placement = store.elem_placements.get((kind, label))
        if placement is None:
            placement = store.config.element_placement(label)
            store.elem_placements[(kind, label)] = placement
            self._placements.append((store.elem_placements, (kind, label)))
            self._meta(object="element", kind=kind, label=label, placement=placement)
        if placement == GENERAL:
            t = self._table(VERTEX_TABLE if kind == VERTEX else EDGE_TABLE, kind)
        elif kind == VERTEX:
            t = self._named_table(vertex_table_name(label), VERTEX, label=label)
        else:
            t = self._named_table(edge_table_name(label, src_label, dst_label), EDGE,
                                  label=label, src_label=src_label, dst_label=dst_label)
        if store.config.default_property == TABLE:
            self._prop_table(t)
        return t

    def _named_table(self, name: str, kind: str, **attrs) -> Table:
        base, n = name, 1
        while True:
            t = self.store.tables.get(name)
            if t is None:
                return self._table(name, kind, **attrs)
            if (t.kind, t.label, t.src_label, t.dst_label) == (
                    kind, attrs.get("label"), attrs.get("src_label"), attrs.get("dst_label")):
                return t
            n += 1
            name = f"{base}_{n}"

    def _prop_table(self, element_table: Table) -> Table:
        return self._table(property_table_name(element_table.name), PROPERTY,
                           element_table=element_table.name)

    def _placement(self, kind: str, label: str, key: str, table: Table, inherits: bool) -> str:
        store = self.store
        k = (kind, label, key)
        p = store.prop_placements.get(k)
        if p is None:
            p = store.config.property_placement(label, key)
            if p == COLUMN and not inherits:
                # a column cannot carry its own validity
                p = TABLE
            store.prop_placements[k] = p
            self._placements.append((store.prop_placements, k))
            self._meta(object="property", kind=kind, label=label, key=key, placement=p, table=table.name)
            if p == COLUMN and key not in table.columns:
                table.add_column(key)
                self._columns.append((table, key))
        elif p == COLUMN and not inherits:
            raise PlacementError(
                f"{label}.{key} is stored as a column; its valid time must equal the owner's")
        elif p == COLUMN and key not in table.columns:
            # another table of the same label (TFL edges split by endpoint labels)
            table.add_column(key)
            self._columns.append((table, key))
            self._meta(object="column", table=table.name, key=key)
        return p

    def _alloc_id(self, explicit: int | None) -> int:
        store = self.store
        if explicit is not None:
            explicit = int(explicit)
            if explicit in store.location or explicit <= 0:
                raise DuplicateId(f"element id {explicit} is already in use")
            eid = explicit
            store.next_id = max(store.next_id, eid + 1)
        else:
            eid = store.next_id
            store.next_id += 1
        self._ids.append(eid)
        return eid

    def _current(self, eid: int) -> tuple[str, Table, Row]:
        loc = self.store.location.get(eid)
        if loc is not None:
            kind, table = loc
            rows = table.by_id.get(eid)
            if rows and rows[-1].tx_to == POS_INF:
                return kind, table, rows[-1]
        raise UnknownElement(f"no current element with id {eid}")

    def _current_props(self, table: Table, owner: int, key: str | None = None) -> list[tuple[Table, Row]]:
        pname = property_table_name(table.name)
        pt = self.store.tables.get(pname)
        if pt is None:
            return []
        return [(pt, r) for r in list(pt.by_id.get(owner, ()))
                if r.tx_to == POS_INF and (key is None or r.key == key)]

    def _check_tag(self, owner: int, key: str, value) -> None:
        tag = value_tag(value)
        old = self.store.value_tags.get((owner, key))
        if old is not None and old != tag:
            raise TypeMismatch(f"property {key!r} of {owner} holds {old}, got {tag}")

    def _record_tag(self, owner: int, key: str, value) -> None:
        k = (owner, key)
        if k not in self.store.value_tags:
            self.store.value_tags[k] = value_tag(value)
            self._tags.append(k)

    @staticmethod
    def _valid(valid: Period | None, default: Period = ALWAYS) -> Period:
        if valid is None:
            return default
        valid = Period(int(valid[0]), int(valid[1]))
        if valid.empty:
            raise InvalidPeriod(f"valid period {valid} is empty")
        return valid

    def _split_props(self, props, owner_valid: Period) -> list[tuple[str, object, Period]]:
        out = []
        items = []
        for key, spec in (props or {}).items():
            # a list holds several valid-time versions of one key
            if isinstance(spec, list):
                items.extend((key, s) for s in spec)
            else:
                items.append((key, spec))
        for key, spec in items:
            if isinstance(spec, tuple):
                value, pvalid = spec
            elif isinstance(spec, dict):
                value, pvalid = spec["value"], spec.get("valid")
            else:
                value, pvalid = spec, None
            try:
                value = _coerce_value(value)
            except TypeError as exc:
                raise TypeMismatch(str(exc)) from None
            pvalid = self._valid(pvalid, owner_valid)
            if not contains(owner_valid, pvalid):
                raise ReferentialViolation(
                    f"property {key!r} valid {pvalid} exceeds owner valid {owner_valid}")
            out.append((key, value, pvalid))
        return out

    def _write_props(self, kind: str, table: Table, row: Row, props) -> None:
        for key, value, pvalid in props:
            p = self._placement(kind, row.label, key, table, pvalid == row.valid)
            self._record_tag(row.id, key, value)
            if p == COLUMN:
                row.cols[key] = value
            else:
                pt = self._prop_table(table)
                self._insert(pt, Row(self.store._next_seq(), row.id, pvalid.start, pvalid.end,
                                     PENDING, POS_INF, key=key, value=value))

    # -- modification API --------------------------------------------------------

    def add_vertex(self, label: str, props=None, valid: Period | None = None, id: int | None = None) -> int:
        self._check_open()
        if not label:
            raise ValueError("vertex label must be non-empty")
        valid = self._valid(valid)
        plist = self._split_props(props, valid)
        eid = self._alloc_id(id)
        table = self._element_table(VERTEX, label)
        row = Row(self.store._next_seq(), eid, valid.start, valid.end, PENDING, POS_INF, label=label)
        self._insert(table, row)
        self.store.location[eid] = (VERTEX, table)
        self.store.label_of[eid] = label
        self._write_props(VERTEX, table, row, plist)
        table.touch()
        return eid

    def add_edge(self, label: str, src: int, dst: int, props=None, valid: Period | None = None,
                 id: int | None = None) -> int:
        self._check_open()
        if not label:
            raise ValueError("edge label must be non-empty")
        ends = []
        for v in (src, dst):
            loc = self.store.location.get(v)
            try:
                kind, _, r = self._current(v)
            except UnknownElement:
                kind = None
            if loc is None or kind != VERTEX:
                raise UnknownEndpoint(f"edge endpoint {v} is not a current vertex")
            ends.append(r)
        valid = self._valid(valid)
        for r in ends:
            if not contains(r.valid, valid):
                raise ReferentialViolation(
                    f"edge valid {valid} not contained in vertex {r.id} valid {r.valid}")
        plist = self._split_props(props, valid)
        eid = self._alloc_id(id)
        table = self._element_table(EDGE, label, ends[0].label, ends[1].label)
        row = Row(self.store._next_seq(), eid, valid.start, valid.end, PENDING, POS_INF,
                  label=label, src=src, dst=dst)
        self._insert(table, row)
        self.store.location[eid] = (EDGE, table)
        self.store.label_of[eid] = label
        self.store.incident[src].add(eid)
        self.store.incident[dst].add(eid)
        self._write_props(EDGE, table, row, plist)
        table.touch()
        return eid

    def set_property(self, owner: int, key: str, value, valid: Period | None = None) -> None:
        self._check_open()
        kind, table, row = self._current(owner)
        try:
            value = _coerce_value(value)
        except TypeError as exc:
            raise TypeMismatch(str(exc)) from None
        valid = self._valid(valid, row.valid)
        if not contains(row.valid, valid):
            raise ReferentialViolation(f"property valid {valid} exceeds owner valid {row.valid}")
        self._check_tag(owner, key, value)
        p = self._placement(kind, row.label, key, table, valid == row.valid)
        self._record_tag(owner, key, value)
        if p == COLUMN:
            cols = dict(row.cols)
            cols[key] = value
            self._replace(table, row, cols=cols)
            return
        for pt, pr in self._current_props(table, owner, key):
            if pr.val_from < valid.end and valid.start < pr.val_to:
                self._close(pt, pr)
        pt = self._prop_table(table)
        self._insert(pt, Row(self.store._next_seq(), owner, valid.start, valid.end,
                             PENDING, POS_INF, key=key, value=value))

    def set_valid_time(self, target, valid: Period) -> None:
        self._check_open()
        valid = self._valid(valid)
        if isinstance(target, tuple):
            self._set_property_valid(*target, valid)
            return
        kind, table, row = self._current(target)
        if valid == row.valid:
            return
        if kind == VERTEX:
            for eid in sorted(self.store.incident.get(target, ())):
                try:
                    _, _, er = self._current(eid)
                except UnknownElement:
                    continue
                if not contains(valid, er.valid):
                    raise ReferentialViolation(
                        f"vertex {target} valid {valid} would not contain edge {eid} valid {er.valid}")
        else:
            for v in (row.src, row.dst):
                _, _, vr = self._current(v)
                if not contains(vr.valid, valid):
                    raise ReferentialViolation(
                        f"edge valid {valid} not contained in vertex {v} valid {vr.valid}")
        props = self._current_props(table, target)
        follow = []
        for pt, pr in props:
            if pr.valid == row.valid:
                follow.append((pt, pr))
            elif not contains(valid, pr.valid):
                raise ReferentialViolation(
                    f"property {pr.key!r} valid {pr.valid} would exceed owner valid {valid}")
        old_valid = row.valid
        self._replace(table, row, val_from=valid.start, val_to=valid.end)
        for pt, pr in follow:
            if pr.valid == old_valid:
                self._replace(pt, pr, val_from=valid.start, val_to=valid.end)

    def _set_property_valid(self, owner: int, key: str, valid: Period) -> None:
        kind, table, row = self._current(owner)
        if self.store.prop_placements.get((kind, row.label, key)) == COLUMN:
            if key not in row.cols:
                raise UnknownElement(f"element {owner} has no property {key!r}")
            if valid != row.valid:
                raise PlacementError(f"{row.label}.{key} is stored as a column; its valid time is the owner's")
            return
        current = self._current_props(table, owner, key)
        if not current:
            raise UnknownElement(f"element {owner} has no current property {key!r}")
        if len(current) > 1:
            raise UnknownElement(
                f"property {key!r} of {owner} has {len(current)} current versions; target is ambiguous")
        if not contains(row.valid, valid):
            raise ReferentialViolation(f"property valid {valid} exceeds owner valid {row.valid}")
        pt, pr = current[0]
        if pr.valid != valid:
            self._replace(pt, pr, val_from=valid.start, val_to=valid.end)

    def delete_property(self, owner: int, key: str) -> None:
        self._check_open()
        kind, table, row = self._current(owner)
        if self.store.prop_placements.get((kind, row.label, key)) == COLUMN:
            if key not in row.cols:
                raise UnknownElement(f"element {owner} has no property {key!r}")
            cols = {k: v for k, v in row.cols.items() if k != key}
            self._replace(table, row, cols=cols)
            return
        current = self._current_props(table, owner, key)
        if not current:
            raise UnknownElement(f"element {owner} has no current property {key!r}")
        for pt, pr in current:
            self._close(pt, pr)

    def delete_element(self, eid: int) -> None:
        self._check_open()
        kind, table, row = self._current(eid)
        if kind == VERTEX:
            for e in sorted(self.store.incident.get(eid, ())):
                try:
                    self._current(e)
                except UnknownElement:
                    continue
                self._delete_one(e)
        self._delete_one(eid)

    def _delete_one(self, eid: int) -> None:
        _, table, row = self._current(eid)
        for pt, pr in self._current_props(table, eid):
            self._close(pt, pr)
        self._close(table, row)

    # -- completion --------------------------------------------------------------

    def _stamp(self, t: int) -> None:
        for op, table, row in self._ops:
            if op == "INSERT":
                row.tx_from = t
            else:
                row.tx_to = t
            table.touch()

    def _touched_ids(self) -> set[int]:
        ids = set()
        store = self.store
        for _, table, row in self._ops:
            if table.kind in (VERTEX, EDGE, PROPERTY) and row.id is not None:
                ids.add(row.id)
        for eid in list(ids):
            loc = store.location.get(eid)
            if loc is None:
                continue
            if loc[0] == EDGE:
                rows = loc[1].by_id.get(eid, ())
                if rows:
                    ids.update((rows[-1].src, rows[-1].dst))
            else:
                ids.update(store.incident.get(eid, ()))
        for eid in list(ids):
            loc = store.location.get(eid)
            if loc is not None and loc[0] == EDGE:
                rows = loc[1].by_id.get(eid, ())
                if rows:
                    ids.update((rows[-1].src, rows[-1].dst))
        return ids

    def _verify(self, horizon: int) -> list:
        snap = Snapshot(self.store, horizon)
        ids = self._touched_ids()
        vs, es, ps = [], [], []
        for eid in ids:
            vers = snap.versions_of(eid, (NEG_INF, POS_INF))
            if vers and isinstance(vers[0], VertexVersion):
                vs += vers
            else:
                es += vers
            for key in snap.property_keys(eid):
                ps += snap.property_versions(eid, key, (NEG_INF, POS_INF))
        # edges of unrelated endpoints are out of scope; keep edges whose endpoints we hold
        held = {v.id for v in vs}
        es = [e for e in es if e.src in held and e.dst in held]
        out = []
        for domain in (TimeDomain.TX, TimeDomain.VAL):
            out += check_integrity(vs, es, ps, domain)
        return out

    def _commit_meta_only(self) -> None:
        """Commit catalog rows written outside of any data change."""
        t = int(self.store.clock())
        self._stamp(t)
        entries = [ChangeEntry(op, table.name, row_image(table, row), _identity(table, row))
                   for op, table, row in self._ops]
        if self.store._log is not None and entries:
            self.store._log.append(entries)
        self.state = "COMMITTED"
        self.store._release()

    def commit(self, commit_time: int | None = None) -> ChangeSet:
        """Commit; ``commit_time`` backdates the transaction time (must follow the last commit)."""
        self._check_open()
        store = self.store
        if not any(t.kind != META for _, t, _ in self._ops):
            self.abort()
            self.state = "COMMITTED"
            return ChangeSet(store.name, None, [])
        if commit_time is not None and int(commit_time) <= store.last_commit:
            self.abort()
            raise TransactionError("commit time must be later than the last commit")
        before = store.snapshot(store.last_commit)
        t = store._next_commit_time() if commit_time is None else int(commit_time)
        self._stamp(t)
        if store.verify:
            violations = self._verify(t)
            if violations:
                for op, table, row in self._ops:
                    if op == "INSERT":
                        row.tx_from = PENDING
                    else:
                        row.tx_to = PENDING
                self.abort()
                raise ConstraintViolation(f"commit rejected: {len(violations)} integrity violation(s)",
                                          violations)
        with store._lock:
            store.last_commit = t
            store.commits.append(t)
        entries = [ChangeEntry(op, table.name, row_image(table, row), _identity(table, row))
                   for op, table, row in self._ops]
        cs = ChangeSet(store.name, t, entries)
        if store._log is not None:
            store._log.append(entries)
        self.state = "COMMITTED"
        store._release()
        after = store.snapshot(t)
        for listener in list(store.listeners):
            try:
                listener(cs, before, after)
            except Exception as exc:  # listeners never block a commit
                store.listener_errors.append((t, exc))
        return cs

    def abort(self) -> None:
        if self.state != "OPEN":
            return
        store = self.store
        for op, table, row in reversed(self._ops):
            if op == "CLOSE":
                row.tx_to = POS_INF
                table.touch()
        by_table: dict[str, list[Row]] = defaultdict(list)
        for table, row in self._inserted.values():
            by_table[table.name].append(row)
        for name, rows in by_table.items():
            store.tables[name].remove(rows)
        for name in reversed(self._created_tables):
            store.tables.pop(name, None)
        for d, k in self._placements:
            d.pop(k, None)
        for table, key in self._columns:
            if key in table.columns:
                table.columns.remove(key)
        for eid in self._ids:
            store.location.pop(eid, None)
            store.label_of.pop(eid, None)
            for s in store.incident.values():
                s.discard(eid)
        for k in self._tags:
            store.value_tags.pop(k, None)
        store.next_id = self._next_id0
        store.seq = self._seq0
        store.catalog_version += 1
        self.state = "ABORTED"
        store._release()
