"""Bitemporal graph element versions and the integrity checker.

Vertices, edges and property values are all carried as immutable versions,
each stamped with a valid-time and a transaction-time period.  The checker
works on plain collections of versions so it can be pointed at anything:
storage snapshots, hand-built graphs or deliberately corrupted tables.
"""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels
from .chronos import Period, TimeDomain, Timestamp, contains

ElementId = int


class ElementKind(enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"


class BitemporalStamp(NamedTuple):
    valid: Period
    tx: Period

    def period(self, domain: TimeDomain) -> Period:
        return self.tx if domain is TimeDomain.TX else self.valid


@dataclass(frozen=True, slots=True)
class VertexVersion:
    id: ElementId
    label: str
    valid: Period
    tx: Period

    @property
    def stamp(self) -> BitemporalStamp:
        return BitemporalStamp(self.valid, self.tx)

    kind = ElementKind.VERTEX


@dataclass(frozen=True, slots=True)
class EdgeVersion:
    id: ElementId
    label: str
    src: ElementId
    dst: ElementId
    valid: Period
    tx: Period

    @property
    def stamp(self) -> BitemporalStamp:
        return BitemporalStamp(self.valid, self.tx)

    kind = ElementKind.EDGE


@dataclass(frozen=True, slots=True)
class PropertyVersion:
    owner: ElementId
    owner_kind: ElementKind
    key: str
    value: object
    valid: Period
    tx: Period

    @property
    def stamp(self) -> BitemporalStamp:
        return BitemporalStamp(self.valid, self.tx)


ElementVersion = VertexVersion | EdgeVersion


def value_tag(value: object) -> str:
    """Type tag of a property value; raises ``TypeError`` for unsupported types."""
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, Timestamp):
        return "timestamp"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    raise TypeError(f"unsupported property value type {type(value).__name__}")


def visible_at(stamp: BitemporalStamp, domain: TimeDomain, t: int) -> bool:
    return contains(stamp.period(domain), t)


@dataclass(frozen=True)
class Violation:
    constraint: str  # "C1" .. "C5"
    elements: tuple
    instant: int | None
    detail: str = ""


# -- helpers -------------------------------------------------------------------


def _first_gap(target: Period, cover: Iterable[Period]) -> int | None:
    """First instant of ``target`` not covered by the union of ``cover``."""
    t = target.start
    for p in sorted(cover):
        if p.start > t:
            break
        if p.end > t:
            t = p.end
        if t >= target.end:
            return None
    return t if t < target.end else None


def _coverage_violation(child, parents, domain: TimeDomain) -> int | None:
    """Witness instant where ``child`` exists without any of ``parents``.

    In the transaction domain only tx periods are compared.  In the valid
    domain the comparison is made per transaction-time state: within every
    tx segment of the child, the valid periods of the parent versions
    visible in that segment must cover the child's valid period.
    """
    if domain is TimeDomain.TX:
        return _first_gap(child.tx, [p.tx for p in parents])
    cuts = {child.tx.start, child.tx.end}
    for p in parents:
        for b in (p.tx.start, p.tx.end):
            if child.tx.start < b < child.tx.end:
                cuts.add(b)
    cuts = sorted(cuts)
    for a, b in zip(cuts, cuts[1:]):
        live = [p.valid for p in parents if p.tx.start <= a and p.tx.end >= b]
        gap = _first_gap(child.valid, live)
        if gap is not None:
            return gap
    return None


def _overlap_violations(groups: dict, both: bool, domain: TimeDomain, tag):
    """C1 overlap check over versions grouped by identity."""
    keys = list(groups)
    rows = [(gi, v) for gi, k in enumerate(keys) for v in groups[k]]
    if len(rows) < 2:
        return []
    g = np.fromiter((gi for gi, _ in rows), dtype=np.int64, count=len(rows))
    txs = np.array([[v.tx.start, v.tx.end] for _, v in rows], dtype=np.int64)
    if both:
        vals = np.array([[v.valid.start, v.valid.end] for _, v in rows], dtype=np.int64)
    else:
        # any valid periods "overlap": compare tx only
        vals = np.tile(np.array([0, 1], dtype=np.int64), (len(rows), 1))
    pairs = _kernels.overlap_pairs(g, txs[:, 0], txs[:, 1], vals[:, 0], vals[:, 1])
    out = []
    for i, j in pairs:
        a, b = rows[i][1], rows[j][1]
        pa, pb = a.stamp.period(domain), b.stamp.period(domain)
        witness = max(pa.start, pb.start)
        out.append(Violation("C1", (tag(keys[rows[i][0]]),), witness, "duplicate version"))
    return out


# -- checker -------------------------------------------------------------------


def check_integrity(vertices, edges, props, domain: TimeDomain) -> list[Violation]:
    vertices, edges, props = list(vertices), list(edges), list(props)
    out: list[Violation] = []

    v_by_id: dict[int, list[VertexVersion]] = defaultdict(list)
    for v in vertices:
        v_by_id[v.id].append(v)
    e_by_id: dict[int, list[EdgeVersion]] = defaultdict(list)
    for e in edges:
        e_by_id[e.id].append(e)
    p_by_key: dict[tuple, list[PropertyVersion]] = defaultdict(list)
    for p in props:
        p_by_key[(p.owner, p.key)].append(p)

    # C1: uniqueness.  An element has at most one version per tx instant;
    # property values may coexist in tx as long as their valid periods are
    # disjoint.  In the valid domain elements are compared per tx state too.
    elem_both = domain is TimeDomain.VAL
    out += _overlap_violations(v_by_id, elem_both, domain, lambda k: k)
    out += _overlap_violations(e_by_id, elem_both, domain, lambda k: k)
    out += _overlap_violations(p_by_key, True, domain, lambda k: k)
    for group in (v_by_id, e_by_id):
        for eid, versions in group.items():
            ends = [v.tx.end for v in versions]
            if len(set(ends)) != len(ends):
                reported = any(x.constraint == "C1" and x.elements == (eid,) for x in out)
                if not reported:
                    out.append(Violation("C1", (eid,), None, "duplicate (id, tx_to) key"))

    # C2: an edge needs both endpoint vertices.
    for eid, versions in e_by_id.items():
        for e in versions:
            for end in (e.src, e.dst):
                w = _coverage_violation(e, v_by_id.get(end, ()), domain)
                if w is not None:
                    out.append(Violation("C2", (eid, end), w, "edge outlives endpoint"))
                    break

    # C3: a property value needs its owner.
    for (owner, key), versions in p_by_key.items():
        kind = versions[0].owner_kind
        owners = v_by_id.get(owner, ()) if kind is ElementKind.VERTEX else e_by_id.get(owner, ())
        for p in versions:
            w = _coverage_violation(p, owners, domain)
            if w is not None:
                out.append(Violation("C3", ((owner, key),), w, "property outlives owner"))
                break

    # C4: constant endpoints.
    for eid, versions in e_by_id.items():
        ends = {(e.src, e.dst) for e in versions}
        if len(ends) > 1:
            later = max(versions, key=lambda e: e.stamp.period(domain).start)
            out.append(Violation("C4", (eid,), later.stamp.period(domain).start, "endpoints changed"))

    # C5: constant labels; property keys stay attached to one owner kind.
    for group in (v_by_id, e_by_id):
        for eid, versions in group.items():
            if len({v.label for v in versions}) > 1:
                later = max(versions, key=lambda v: v.stamp.period(domain).start)
                out.append(Violation("C5", (eid,), later.stamp.period(domain).start, "label changed"))
    for (owner, key), versions in p_by_key.items():
        kinds = {p.owner_kind for p in versions}
        wrong = (owner in v_by_id and ElementKind.EDGE in kinds) or (
            owner in e_by_id and ElementKind.VERTEX in kinds)
        if len(kinds) > 1 or wrong:
            out.append(Violation("C5", ((owner, key),), None, "owner kind changed"))
    return out
