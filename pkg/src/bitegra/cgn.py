"""Continuous graph notifications (GCN and GRCN)."""
from __future__ import annotations

import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

from .chronos import ALWAYS, Period, format_timestamp, parse_timestamp
from .errors import BitegraError, UnknownRegistration
from .executor import execute, match
from .planner import LogicalPlan, plan
from .tpgql import parse

GCN = "GCN"
GRCN = "GRCN"
PATTERN_TOUCHED = "PATTERN_TOUCHED"
RESULT_CHANGED = "RESULT_CHANGED"


@dataclass(frozen=True)
class Notification:
    registration_id: int
    type: str
    commit_time: int
    changed_elements: tuple  # ((element id, kind, op), ...)
    reason: str

    def to_json(self) -> dict:
        return {
            "registration_id": self.registration_id,
            "type": self.type,
            "commit_time": format_timestamp(self.commit_time, "full"),
            "changed_elements": [list(x) for x in self.changed_elements],
            "reason": self.reason,
        }


class InMemoryQueue:
    def __init__(self, name: str):
        self.name = name
        self._items: list[Notification] = []
        self._lock = threading.Lock()

    def put(self, n: Notification) -> None:
        with self._lock:
            self._items.append(n)

    def drain(self) -> list[Notification]:
        with self._lock:
            out, self._items = self._items, []
        return out

    def peek(self) -> list[Notification]:
        with self._lock:
            return list(self._items)

    @property
    def spec(self) -> str:
        return f"queue:{self.name}"


class FileSink:
    def __init__(self, path):
        self.path = Path(path)

    def put(self, n: Notification) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(n.to_json()) + "\n")

    @property
    def spec(self) -> str:
        return f"file:{self.path}"


@dataclass
class Registration:
    id: int
    query_text: str
    type: str
    validity: Period
    endpoint: object
    graph: str
    plan: LogicalPlan | None = field(default=None, repr=False)
    catalog_version: int = -1
    cached: object = field(default=None, repr=False)  # result multiset at cached_horizon
    cached_horizon: int | None = None

    def active_at(self, t: int) -> bool:
        return self.validity.start <= t < self.validity.end

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "query": self.query_text,
            "type": self.type,
            "validity": [format_timestamp(self.validity.start, "full"),
                         format_timestamp(self.validity.end, "full")],
            "endpoint": self.endpoint.spec,
            "graph": self.graph,
        }


class CGNEngine:
    """Registrations of one database; evaluated synchronously on every commit."""

    def __init__(self, db, path=None):
        self.db = db
        self.path = Path(path) if path else None
        self.registrations: OrderedDict[int, Registration] = OrderedDict()
        self.queues: dict[str, InMemoryQueue] = {}
        self.failures: list[tuple[int, int, str]] = []  # (registration, commit time, error)
        self._next = 1
        self._attached: set[str] = set()

    # -- endpoints -------------------------------------------------------------

    def queue(self, name: str) -> InMemoryQueue:
        q = self.queues.get(name)
        if q is None:
            q = self.queues[name] = InMemoryQueue(name)
        return q

    def endpoint(self, spec) -> object:
        """Resolve ``queue:<name>``, ``file:<path>`` or an endpoint object."""
        if hasattr(spec, "put"):
            return spec
        if spec is None:
            return self.queue("default")
        if spec.startswith("queue:"):
            return self.queue(spec[6:])
        if spec.startswith("file:"):
            return FileSink(spec[5:])
        return FileSink(spec)

    # -- registration ----------------------------------------------------------

    def attach(self, store) -> None:
        if store.name in self._attached:
            return
        self._attached.add(store.name)
        store.listeners.append(lambda cs, before, after: self.on_commit(cs, before, after))

    def register(self, query_text: str, type: str = GCN, validity: Period | None = None,
                 endpoint=None, graph: str | None = None, _id: int | None = None) -> int:
        type = type.upper()
        if type not in (GCN, GRCN):
            raise ValueError(f"notification type must be GCN or GRCN, got {type!r}")
        q = parse(query_text)
        store = self.db.graph(q.graph or graph)
        rid = _id if _id is not None else self._next
        self._next = max(self._next, rid + 1)
        reg = Registration(rid, query_text, type, validity or ALWAYS, self.endpoint(endpoint), store.name)
        self._plan(reg, store)
        if type == GRCN and not reg.plan.uses_current_timestamp:
            snap = store.snapshot()
            reg.cached = execute(reg.plan, snap, self.db.now(store)).multiset()
            reg.cached_horizon = snap.horizon
        self.attach(store)
        self.registrations[rid] = reg
        self._save()
        return rid

    def deregister(self, rid: int) -> None:
        if rid not in self.registrations:
            raise UnknownRegistration(f"no registration with id {rid}")
        del self.registrations[rid]
        self._save()

    def _plan(self, reg: Registration, store) -> LogicalPlan:
        if reg.plan is None or reg.catalog_version != store.catalog_version:
            reg.plan = plan(parse(reg.query_text), store)
            reg.catalog_version = store.catalog_version
        return reg.plan

    # -- checks ------------------------------------------------------------------

    def gcn_check(self, reg: Registration, cs, after, before=None) -> bool:
        """Did a changed element bind into a structural match of the pattern?"""
        p = self._plan(reg, after.store)
        if not (cs.touched_tables() & p.tables):
            return False
        changed = {eid for eid, _, _ in cs.changed_elements()}
        for snap in ((before, after) if before is not None else (after,)):
            for row in match(p, snap, cs.commit_time):
                if any(v.id in changed for v in row.elems.values()):
                    return True
        return False

    def grcn_check(self, reg: Registration, cs, before, after) -> bool:
        """Does the query result differ between the states around the commit?"""
        p = self._plan(reg, after.store)
        t = cs.commit_time
        reusable = (not p.uses_current_timestamp and reg.cached is not None
                    and reg.cached_horizon == before.horizon)
        if not (cs.touched_tables() & p.tables):
            if reusable:
                reg.cached_horizon = after.horizon
            return False
        prev = reg.cached if reusable else execute(p, before, t).multiset()
        cur = execute(p, after, t).multiset()
        if p.uses_current_timestamp:
            reg.cached, reg.cached_horizon = None, None
        else:
            reg.cached, reg.cached_horizon = cur, after.horizon
        return prev != cur

    def on_commit(self, cs, before, after) -> list[Notification]:
        out = []
        t = cs.commit_time
        for reg in list(self.registrations.values()):
            if reg.graph != cs.graph:
                continue
            if not reg.active_at(t):
                reg.cached, reg.cached_horizon = None, None
                continue
            try:
                if reg.type == GCN:
                    fired, reason = self.gcn_check(reg, cs, after, before), PATTERN_TOUCHED
                else:
                    fired, reason = self.grcn_check(reg, cs, before, after), RESULT_CHANGED
            except BitegraError as exc:
                self.failures.append((reg.id, t, f"evaluation failed: {exc}"))
                reg.cached = None
                continue
            if not fired:
                continue
            tables = reg.plan.tables
            changed = tuple(dict.fromkeys(
                (e.identity[1], e.identity[0], e.op) for e in cs.data_entries() if e.table in tables))
            n = Notification(reg.id, reg.type, t, changed, reason)
            out.append(n)
            try:
                reg.endpoint.put(n)
            except Exception as exc:  # endpoint trouble never blocks a commit
                self.failures.append((reg.id, t, repr(exc)))
        return out

    # -- persistence -------------------------------------------------------------

    def _save(self) -> None:
        if self.path is None:
            return
        data = [r.to_json() for r in self.registrations.values()]
        self.path.write_text(json.dumps(data, indent=2) + "\n")

    def load(self) -> None:
        if self.path is None or not self.path.exists():
            return
        for r in json.loads(self.path.read_text()):
            validity = Period(parse_timestamp(r["validity"][0]), parse_timestamp(r["validity"][1]))
            self.register(r["query"], r["type"], validity, r["endpoint"], r["graph"], _id=r["id"])
