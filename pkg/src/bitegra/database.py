"""Database facade: graphs, queries and notifications in one place."""
from __future__ import annotations

from pathlib import Path

from .cgn import CGNEngine
from .errors import DuplicateGraph, UnknownGraph
from .executor import ResultTable, execute
from .planner import LogicalPlan, emit_sql, plan
from .storage import GraphStore, SchemaConfig, wall_clock_ms
from .storage import durability
from .tpgql import parse

SCHEMA_SUFFIX = ".schema.json"
LOG_SUFFIX = ".log.jsonl"


class Database:
    """A set of named graphs, optionally persisted in directory ``path``."""

    def __init__(self, path=None, clock=None, verify: bool = True):
        self.path = Path(path) if path else None
        self.clock = clock or wall_clock_ms
        self.verify = verify
        self.graphs: dict[str, GraphStore] = {}
        self._default: str | None = None
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)
        self.cgn = CGNEngine(self, self.path / "registrations.json" if self.path else None)
        if self.path is not None:
            for schema_file in sorted(self.path.glob("*" + SCHEMA_SUFFIX)):
                name = schema_file.name[: -len(SCHEMA_SUFFIX)]
                store = self._new_store(name, SchemaConfig.load(schema_file))
                store.replay(durability.GraphLog(self.path / (name + LOG_SUFFIX)).read())
                self._add(store)
            self.cgn.load()

    def _new_store(self, name: str, config: SchemaConfig) -> GraphStore:
        log = self.path / (name + LOG_SUFFIX) if self.path else None
        return GraphStore(name, config, self.clock, log, self.verify)

    def _add(self, store: GraphStore) -> None:
        self.graphs[store.name] = store
        if self._default is None:
            self._default = store.name
        self.cgn.attach(store)

    def create_graph(self, name: str, config: SchemaConfig | None = None) -> GraphStore:
        if name in self.graphs:
            raise DuplicateGraph(f"graph {name!r} already exists")
        config = config or SchemaConfig()
        if self.path is not None:
            config.dump(self.path / (name + SCHEMA_SUFFIX))
        store = self._new_store(name, config)
        store._materialize_initial()
        self._add(store)
        return store

    def graph(self, name: str | None = None) -> GraphStore:
        if name is None:
            if self._default is None:
                raise UnknownGraph("database has no graphs")
            name = self._default
        try:
            return self.graphs[name]
        except KeyError:
            raise UnknownGraph(f"unknown graph {name!r}") from None

    def use(self, name: str) -> None:
        self._default = self.graph(name).name

    def now(self, store: GraphStore | None = None) -> int:
        t = int(self.clock())
        if store is not None:
            t = max(t, store.last_commit)
        return t

    # -- queries -----------------------------------------------------------------

    def prepare(self, text: str, graph: str | None = None) -> LogicalPlan:
        q = parse(text)
        return plan(q, self.graph(q.graph or graph))

    def query(self, text: str, graph: str | None = None, eval_instant: int | None = None) -> ResultTable:
        p = self.prepare(text, graph)
        store = self.graph(p.graph)
        snap = store.snapshot()
        t = self.now(store) if eval_instant is None else eval_instant
        return execute(p, snap, t)

    def explain_sql(self, text: str, graph: str | None = None) -> str:
        return emit_sql(self.prepare(text, graph))

    def register(self, text: str, type: str = "GCN", validity=None, endpoint=None,
                 graph: str | None = None) -> int:
        return self.cgn.register(text, type, validity, endpoint, graph)

    def deregister(self, rid: int) -> None:
        self.cgn.deregister(rid)
