"""Random modification histories and an independent log-replay oracle."""
from __future__ import annotations

import random
from collections import Counter

from bitegra.chronos import Period, format_timestamp
from bitegra.errors import StorageError

VERTEX_LABELS = ("A", "B")
EDGE_LABELS = ("r", "s")


def random_period(rng: random.Random, lo: int = 0, hi: int = 100) -> Period:
    a = rng.randrange(lo, hi - 1)
    return Period(a, rng.randrange(a + 1, hi))


def _value(rng, key):
    return rng.randrange(6) if key in ("p", "w") else rng.choice(["x", "y", "z"])


def _props(rng, keys, owner_valid):
    props = {}
    for key in keys:
        if rng.random() < 0.5:
            continue
        if owner_valid is not None and rng.random() < 0.4:
            a = rng.randrange(owner_valid.start, owner_valid.end)
            props[key] = (_value(rng, key), Period(a, rng.randrange(a + 1, owner_valid.end + 1)))
        else:
            props[key] = _value(rng, key)
    return props


def _inside(rng, outer: Period) -> Period:
    lo, hi = max(outer.start, -50), min(outer.end, 150)
    if hi - lo < 2 or rng.random() < 0.2:
        return outer
    a = rng.randrange(lo, hi - 1)
    return Period(a, rng.randrange(a + 1, hi))


def random_op(tx, rng: random.Random, ids: list[int], edges: list[int], max_elements: int,
              valid_of: dict) -> None:
    """One random modification; invalid choices surface as StorageError.

    ``valid_of`` remembers the last requested validity of every element so
    that most generated edges fit their endpoints (it may be stale after an
    abort, which only produces more rejected operations).
    """
    r = rng.random()
    room = len(ids) + len(edges) < max_elements
    if (r < 0.3 or not ids) and room:
        valid = random_period(rng) if rng.random() < 0.5 else None
        v = tx.add_vertex(rng.choice(VERTEX_LABELS), _props(rng, ("p", "q"), valid), valid)
        ids.append(v)
        valid_of[v] = valid or Period(-10**6, 10**6)
    elif r < 0.5 and room:
        src, dst = rng.choice(ids), rng.choice(ids)
        both = valid_of.get(src, Period(0, 100)).intersect(valid_of.get(dst, Period(0, 100)))
        valid = _inside(rng, both) if both is not None and not both.empty else random_period(rng)
        if valid.start <= -10**6:
            valid = None
        e = tx.add_edge(rng.choice(EDGE_LABELS), src, dst, _props(rng, ("w",), valid), valid)
        edges.append(e)
        valid_of[e] = valid or Period(-10**6, 10**6)
    elif r < 0.72 and ids:
        target = rng.choice(ids + edges)
        key = "w" if target in edges else rng.choice(("p", "q"))
        valid = _inside(rng, valid_of[target]) if rng.random() < 0.3 else None
        tx.set_property(target, key, _value(rng, key), valid)
    elif r < 0.82 and ids:
        target = rng.choice(ids + edges)
        tx.delete_property(target, "w" if target in edges else rng.choice(("p", "q")))
    elif r < 0.92 and ids:
        target = rng.choice(ids + edges)
        valid = random_period(rng) if rng.random() < 0.7 else Period(-10**6, 10**6)
        tx.set_valid_time(target, valid)
        valid_of[target] = valid
    elif ids:
        tx.delete_element(rng.choice(ids + edges))


def run_history(store, rng: random.Random, commits: int, max_elements: int = 30, ops=(1, 3)) -> int:
    """Drive ``commits`` transactions against ``store``; returns how many committed."""
    ids: list[int] = []
    edges: list[int] = []
    valid_of: dict = {}
    done = 0
    for _ in range(commits):
        tx = store.begin()
        try:
            for _ in range(rng.randint(*ops)):
                random_op(tx, rng, ids, edges, max_elements, valid_of)
            cs = tx.commit()
            done += cs.commit_time is not None
        except StorageError:
            tx.abort()
    return done


class LogRecorder:
    """Listener that keeps every committed ChangeSet in order."""

    def __init__(self, store):
        self.changesets = []
        store.listeners.append(lambda cs, before, after: self.changesets.append(cs))

    def live_rows(self, t: int) -> list[tuple[tuple, dict]]:
        """Rows present after replaying the log truncated at commit time ``t``."""
        live: dict[tuple, tuple[tuple, dict]] = {}
        for cs in self.changesets:
            if cs.commit_time > t:
                break
            for e in cs.data_entries():
                k = (e.table, e.row["seq"])
                if e.op == "INSERT":
                    live[k] = (e.identity, e.row)
                else:
                    live.pop(k, None)
        return list(live.values())

    @property
    def times(self) -> list[int]:
        return [cs.commit_time for cs in self.changesets]


SNAPSHOT_QUERIES = {
    "vertices": "SELECT ID(n), LABEL(n) FROM MATCH (n) FOR TX_TIME AS OF TIMESTAMP '{t}'",
    "edges": "SELECT ID(e), ID(a), ID(b), LABEL(e) FROM MATCH (a)-[e]->(b) FOR TX_TIME AS OF TIMESTAMP '{t}'",
    "vprops": "SELECT ID(n), n.p, n.p.VAL_TIME FROM MATCH (n) FOR TX_TIME AS OF TIMESTAMP '{t}'",
    "eprops": "SELECT ID(e), e.w, e.w.VAL_TIME FROM MATCH ()-[e]->() FOR TX_TIME AS OF TIMESTAMP '{t}'",
}


def snapshot_query(name: str, t: int) -> str:
    return SNAPSHOT_QUERIES[name].format(t=format_timestamp(t, "full"))


def expected(rec: LogRecorder, name: str, t: int) -> Counter:
    rows = rec.live_rows(t)
    elems = {ident[1]: img for ident, img in rows if ident[0] in ("vertex", "edge")}
    kind = {ident[1]: ident[0] for ident, _ in rows if ident[0] in ("vertex", "edge")}
    out = Counter()
    if name == "vertices":
        for eid, img in elems.items():
            if kind[eid] == "vertex":
                out[(eid, img["label"])] += 1
    elif name == "edges":
        for eid, img in elems.items():
            if kind[eid] == "edge":
                out[(eid, img["src"], img["dst"], img["label"])] += 1
    else:
        want, key = ("vertex", "p") if name == "vprops" else ("edge", "w")
        for eid, img in elems.items():
            if kind[eid] != want:
                continue
            versions = [(r["value"], Period(r["val_from"], r["val_to"]))
                        for ident, r in rows if ident[0] == "property" and ident[1:] == (eid, key)]
            if key in img["columns"]:
                versions.append((img["columns"][key], Period(img["val_from"], img["val_to"])))
            if not versions:
                out[(eid, None, None)] += 1
            for value, valid in versions:
                out[(eid, value, valid)] += 1
    return out


def _ms(t: int) -> str:
    return f"TIMESTAMP '{format_timestamp(t, 'full')}'"


def query_pool(first_commit: int) -> list[str]:
    """Queries over the vocabulary of :func:`run_history`.

    ``first_commit`` anchors the historical windows near the generated commits.
    """
    t = first_commit
    return [
        "SELECT ID(n), n.p FROM MATCH (n:A) WHERE n.p > 2",
        "SELECT ID(a), ID(b) FROM MATCH (a:A)-[e:r]->(b)",
        "SELECT COUNT(*) FROM MATCH (a)-[e]->(b:B)",
        "SELECT a.q, e.w FROM MATCH (a)-[e:s]->(b) "
        f"WHERE e.w.VAL_TIME OVERLAPS PERIOD({_ms(20)}, {_ms(60)})",
        "SELECT ID(n) FROM MATCH (n:B) FOR TX_TIME ALL",
        "SELECT ID(n), n.TX_FROM FROM MATCH (n) FOR TX_TIME AS OF CURRENT_TIMESTAMP",
        "SELECT n.p, FIRST(n.p.VAL_FROM), LAST(n.VAL_TO) FROM MATCH (n) GROUP BY n.p",
        f"SELECT ID(n), n.q FROM MATCH (n:A) FOR TX_TIME BETWEEN {_ms(t + 3000)} AND {_ms(t + 9000)}",
        f"SELECT ID(e), e.w FROM MATCH ()-[e]->() FOR TX_TIME FROM {_ms(t)} TO CURRENT_TIMESTAMP",
        "SELECT DISTINCT b.q FROM MATCH (a:A)-[:r]->(b)-[:s]->(c) WHERE a.VAL_TIME PRECEDES c.VAL_TIME",
        "SELECT ID(n), n.VAL_TIME FROM MATCH (n) WHERE n.VAL_TIME CONTAINS TIMESTAMP "
        "'1970-01-01 00:00:00.040'",
    ]
