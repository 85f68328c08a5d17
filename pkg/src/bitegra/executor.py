"""Evaluate logical plans against storage snapshots."""
from __future__ import annotations

import functools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator

from . import chronos
from .chronos import NEG_INF, POS_INF, Period, Timestamp
from .errors import QueryTypeError
from .planner import (
    Aggregate,
    Distinct,
    Empty,
    EndpointCheck,
    Filter,
    Join,
    LabelCheck,
    Limit,
    LogicalPlan,
    PlanNode,
    Project,
    PropertyBind,
    Sort,
    TxSpec,
)
from .storage.tables import EDGE
from .tpgql import ast as A


# -- values --------------------------------------------------------------------


def category(v) -> str | None:
    if v is None:
        return None
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, Timestamp):
        return "timestamp"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, Period):
        return "period"
    return type(v).__name__


def value_key(v):
    """Hashable identity of a cell that keeps 1, 1.0, True and timestamps apart."""
    c = category(v)
    if c == "number":
        return (c, float(v)) if isinstance(v, float) and not v.is_integer() else (c, int(v))
    return (c, v)


def _compare(a, b) -> int:
    ca, cb = category(a), category(b)
    if ca != cb:
        raise QueryTypeError(f"cannot order {ca} against {cb}")
    if ca == "period":
        raise QueryTypeError("periods are not ordered; use a period predicate")
    return (a > b) - (a < b)


# -- rows ----------------------------------------------------------------------


class Row:
    __slots__ = ("elems", "props", "ivs")

    def __init__(self, elems=None, props=None, ivs=()):
        self.elems = elems if elems is not None else {}
        self.props = props if props is not None else {}
        self.ivs = ivs

    def with_element(self, var, version, clause, iv) -> "Row":
        elems = dict(self.elems)
        elems[var] = version
        return Row(elems, self.props, _set_iv(self.ivs, clause, iv))

    def with_property(self, var, key, version, clause, iv) -> "Row":
        props = dict(self.props)
        props[(var, key)] = version
        return Row(self.elems, props, _set_iv(self.ivs, clause, iv) if iv is not None else self.ivs)


def _set_iv(ivs: tuple, clause: int, iv) -> tuple:
    if clause >= len(ivs):
        ivs = ivs + (None,) * (clause + 1 - len(ivs))
    return ivs[:clause] + (iv,) + ivs[clause + 1:]


_MISSING = object()


class GroupRow:
    __slots__ = ("values", "aggs")

    def __init__(self, values: dict, aggs: dict):
        self.values = values
        self.aggs = aggs

    def lookup(self, e):
        if isinstance(e, A.Aggregate):
            return self.aggs[e]
        return self.values.get(e, _MISSING)


# -- expressions -----------------------------------------------------------------


_CMP = {
    "=": lambda c: c == 0, "<>": lambda c: c != 0, "<": lambda c: c < 0,
    "<=": lambda c: c <= 0, ">": lambda c: c > 0, ">=": lambda c: c >= 0,
}


class Evaluator:
    def __init__(self, eval_instant: int):
        self.now = Timestamp(eval_instant)

    def __call__(self, e: A.Expr, row):
        if isinstance(row, GroupRow):
            hit = row.lookup(e)
            if hit is not _MISSING:
                return hit
        m = getattr(self, "_" + type(e).__name__)
        return m(e, row)

    def truth(self, e: A.Expr, row) -> bool:
        v = self(e, row)
        if v is None:
            return False
        if not isinstance(v, bool):
            raise QueryTypeError(f"predicate evaluated to {category(v)}, expected boolean")
        return v

    # leaves
    def _Literal(self, e, row):
        return e.value

    def _TemporalLiteral(self, e, row):
        return Timestamp(e.value)

    def _CurrentTimestamp(self, e, row):
        return self.now

    def _VarRef(self, e, row):
        return row.elems[e.name].id

    def _PropRef(self, e, row):
        pv = row.props.get((e.var, e.key))
        return None if pv is None else pv.value

    def _TimeRef(self, e, row):
        target = row.elems[e.var] if e.key is None else row.props.get((e.var, e.key))
        if target is None:
            return None
        p = target.tx if e.ident.startswith("TX") else target.valid
        if e.ident.endswith("_TIME"):
            return p
        return Timestamp(p.start if e.ident.endswith("_FROM") else p.end)

    def _FuncCall(self, e, row):
        el = row.elems[e.args[0].name]
        return el.id if e.name == "ID" else el.label

    # composites
    def _PeriodCtor(self, e, row):
        a, b = self(e.start, row), self(e.end, row)
        if a is None or b is None:
            return None
        for v in (a, b):
            if category(v) != "timestamp":
                raise QueryTypeError(f"PERIOD bound must be a timestamp, got {category(v)}")
        return chronos.new_period(a, b)

    def _Length(self, e, row):
        p = self(e.arg, row)
        if p is None:
            return None
        if not isinstance(p, Period):
            raise QueryTypeError(f"LENGTH expects a period, got {category(p)}")
        return chronos.length(p, e.unit or "MILLISECOND")

    def _Unary(self, e, row):
        v = self(e.operand, row)
        if v is None:
            return None
        if e.op == "NOT":
            if not isinstance(v, bool):
                raise QueryTypeError("NOT expects a boolean")
            return not v
        if category(v) != "number":
            raise QueryTypeError(f"cannot negate {category(v)}")
        return -v

    def _IsNull(self, e, row):
        v = self(e.operand, row)
        return (v is not None) if e.negated else (v is None)

    def _Binary(self, e, row):
        op = e.op
        if op in ("AND", "OR"):
            a = self(e.left, row)
            if op == "AND" and a is False:
                return False
            if op == "OR" and a is True:
                return True
            b = self(e.right, row)
            for v in (a, b):
                if v is not None and not isinstance(v, bool):
                    raise QueryTypeError(f"{op} expects booleans")
            if op == "AND":
                if b is False:
                    return False
                return None if (a is None or b is None) else True
            if b is True:
                return True
            return None if (a is None or b is None) else False
        a, b = self(e.left, row), self(e.right, row)
        if a is None or b is None:
            return None
        if op in _CMP:
            if op in ("=", "<>"):
                ca, cb = category(a), category(b)
                same = ca == cb and a == b
                return same if op == "=" else not same
            return _CMP[op](_compare(a, b))
        return _arith(op, a, b)

    def _TemporalPredicate(self, e, row):
        a, b = self(e.left, row), self(e.right, row)
        if a is None or b is None:
            return None
        if not isinstance(a, Period):
            raise QueryTypeError(f"{e.op} expects a period on the left, got {category(a)}")
        if e.op == "CONTAINS":
            if isinstance(b, Period):
                return chronos.contains(a, b)
            if category(b) != "timestamp":
                raise QueryTypeError(f"CONTAINS expects a period or timestamp, got {category(b)}")
            return chronos.contains(a, int(b))
        if not isinstance(b, Period):
            raise QueryTypeError(f"{e.op} expects a period on the right, got {category(b)}")
        if e.op == "OVERLAPS":
            return chronos.overlaps(a, b)
        if e.op == "EQUALS":
            return chronos.equals(a, b)
        if e.op == "PRECEDES":
            return chronos.precedes(a, b, e.immediately)
        return chronos.succeeds(a, b, e.immediately)

    def _Aggregate(self, e, row):
        raise QueryTypeError(f"aggregate {e.func} outside of an aggregation")


def _arith(op: str, a, b):
    ca, cb = category(a), category(b)
    if ca == cb == "number":
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0:
            return None
        if op == "/":
            return a // b if isinstance(a, int) and isinstance(b, int) else a / b
        return a % b
    if ca == "timestamp" and cb == "number" and op in "+-" and isinstance(b, int):
        return Timestamp(a + b if op == "+" else a - b)
    if ca == cb == "timestamp" and op == "-":
        return int(a) - int(b)
    if ca == cb == "string" and op == "+":
        return a + b
    raise QueryTypeError(f"operator {op} not defined for {ca} and {cb}")


# -- aggregation --------------------------------------------------------------------


class _Acc:
    __slots__ = ("agg", "count", "value", "seen")

    def __init__(self, agg: A.Aggregate):
        self.agg = agg
        self.count = 0
        self.value = None
        self.seen = set() if agg.distinct else None

    def add(self, v) -> None:
        f = self.agg.func
        if self.agg.arg is None:
            self.count += 1
            return
        if v is None:
            return
        if self.seen is not None:
            k = value_key(v)
            if k in self.seen:
                return
            self.seen.add(k)
        self.count += 1
        if f == "COUNT":
            return
        c = category(v)
        if f in ("FIRST", "LAST"):
            if c != "timestamp":
                raise QueryTypeError(f"{f} expects date or timestamp values, got {c}")
        if f in ("SUM", "AVG"):
            if c != "number":
                raise QueryTypeError(f"{f} expects numbers, got {c}")
            self.value = v if self.value is None else self.value + v
            return
        if self.value is None:
            self.value = v
        else:
            cmpv = _compare(v, self.value)
            if (f in ("MIN", "FIRST") and cmpv < 0) or (f in ("MAX", "LAST") and cmpv > 0):
                self.value = v

    def result(self):
        f = self.agg.func
        if f == "COUNT":
            return self.count
        if f == "AVG":
            return None if self.count == 0 else self.value / self.count
        return self.value


# -- results ---------------------------------------------------------------------


@dataclass
class ResultTable:
    columns: tuple
    rows: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def multiset(self) -> Counter:
        return Counter(tuple(value_key(v) for v in r) for r in self.rows)

    def same_multiset(self, other: "ResultTable") -> bool:
        return self.multiset() == other.multiset()

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def render(self, fmt: str = "table") -> str:
        from . import render
        return render.render(self, fmt)


# -- execution ---------------------------------------------------------------------


class _Context:
    def __init__(self, snapshot, eval_instant: int):
        self.snap = snapshot
        self.ev = Evaluator(eval_instant)
        self._windows: dict[TxSpec, tuple[int, int]] = {}
        self._scans: dict[int, list] = {}

    def window(self, tx: TxSpec) -> tuple[int, int]:
        w = self._windows.get(tx)
        if w is None:
            w = tx_window(tx, self.ev)
            self._windows[tx] = w
        return w


def tx_window(tx: TxSpec, ev: Evaluator) -> tuple[int, int]:
    """Close-open transaction-time window selected by a FOR TX_TIME condition."""
    if tx.mode == "ALL":
        return (NEG_INF, POS_INF)
    vals = []
    for a in tx.args:
        v = ev(a, Row())
        if category(v) != "timestamp":
            raise QueryTypeError(f"FOR TX_TIME expects timestamps, got {category(v)}")
        vals.append(int(v))
    if tx.mode == "AS_OF":
        return (vals[0], vals[0] + 1)
    if tx.mode == "BETWEEN":
        return (vals[0], vals[1] + 1)
    return (vals[0], vals[1])


def _intersect(iv, p: Period):
    lo, hi = max(iv[0], p.start), min(iv[1], p.end)
    return (lo, hi) if lo < hi else None


def _run(node: PlanNode | None, ctx: _Context) -> Iterator:
    if node is None:
        yield Row()
        return
    t = type(node)
    if t is Join:
        yield from _join(node, ctx)
    elif t is EndpointCheck:
        for r in _run(node.child, ctx):
            if getattr(r.elems[node.edge], node.end) == r.elems[node.vertex].id:
                yield r
    elif t is LabelCheck:
        for r in _run(node.child, ctx):
            if r.elems[node.var].label in node.labels:
                yield r
    elif t is PropertyBind:
        yield from _bind(node, ctx)
    elif t is Filter:
        for r in _run(node.child, ctx):
            if ctx.ev.truth(node.predicate, r):
                yield r
    elif t is Aggregate:
        yield from _aggregate(node, ctx)
    elif t is Sort:
        rows = list(_run(node.child, ctx))
        yield from _sort(rows, node.keys, ctx.ev)
    elif t is Empty:
        return
    else:
        raise TypeError(f"cannot run {t.__name__} here")


def _join(node: Join, ctx: _Context) -> Iterator[Row]:
    a = node.right
    window = ctx.window(a.tx)
    table_names = {name for name, _ in a.tables}
    snap = ctx.snap
    for r in _run(node.left, ctx):
        iv = r.ivs[a.clause] if a.clause < len(r.ivs) and r.ivs[a.clause] is not None else window
        if node.anchor is None:
            cands = ctx._scans.get(id(node))
            if cands is None:
                cands = snap.elements(a.tables, a.labels, window)
                ctx._scans[id(node)] = cands
        elif a.kind == EDGE:
            anchor = r.elems[node.anchor]
            cands = snap.adjacent_edges(anchor.id, "OUT" if node.on == "src" else "IN",
                                        a.tables, a.labels, window)
        else:
            vid = getattr(r.elems[node.anchor], node.on)
            loc = snap.store.location.get(vid)
            if loc is None or loc[1].name not in table_names:
                continue
            cands = snap.versions_of(vid, window)
            if a.labels is not None:
                cands = [c for c in cands if c.label in a.labels]
        for c in cands:
            niv = _intersect(iv, c.tx)
            if niv is not None:
                yield r.with_element(a.var, c, a.clause, niv)


def _bind(node: PropertyBind, ctx: _Context) -> Iterator[Row]:
    snap = ctx.snap
    for r in _run(node.child, ctx):
        owner = r.elems[node.var]
        iv = r.ivs[node.clause]
        found = False
        for pv in snap.property_versions(owner.id, node.key, iv):
            niv = _intersect(iv, pv.tx)
            if niv is not None:
                found = True
                yield r.with_property(node.var, node.key, pv, node.clause, niv)
        if not found:
            yield r.with_property(node.var, node.key, None, node.clause, None)


def _aggregate(node: Aggregate, ctx: _Context) -> Iterator[GroupRow]:
    yield from _aggregate_rows(node, _run(node.child, ctx), ctx.ev)


def _sort(rows: list, keys, ev: Evaluator) -> list:
    decorated = [([ev(e, r) for e, _ in keys], r) for r in rows]

    def cmp(x, y):
        for (a, b), (_, desc) in zip(zip(x[0], y[0]), keys):
            if a is None and b is None:
                continue
            if a is None:
                return -1 if desc else 1  # nulls last ascending, first descending
            if b is None:
                return 1 if desc else -1
            c = _compare(a, b)
            if c:
                return -c if desc else c
        return 0

    decorated.sort(key=functools.cmp_to_key(cmp))
    return [r for _, r in decorated]


def match(plan: LogicalPlan, snapshot, eval_instant: int) -> Iterator[Row]:
    """Structural matches of the plan's patterns, WHERE ignored."""
    ctx = _Context(snapshot, eval_instant)
    return _run(plan.match, ctx)


def execute(plan: LogicalPlan, snapshot, eval_instant: int) -> ResultTable:
    ctx = _Context(snapshot, eval_instant)
    nodes = []
    n = plan.root
    while isinstance(n, (Limit, Distinct, Project)):
        nodes.append(n)
        n = n.child
    rows = _run(n, ctx)
    out: list[tuple] = []
    limit = None
    distinct = False
    project = None
    for x in nodes:
        if isinstance(x, Limit):
            limit = x.count
        elif isinstance(x, Distinct):
            distinct = True
        else:
            project = x
    seen = set()
    for r in rows:
        if limit is not None and len(out) >= limit:
            break
        cells = tuple(ctx.ev(e, r) for e, _ in project.items)
        if distinct:
            k = tuple(value_key(v) for v in cells)
            if k in seen:
                continue
            seen.add(k)
        out.append(cells)
    return ResultTable(plan.columns, out)


def evaluate_scalar(expr: A.Expr, binding: dict, eval_instant: int):
    """Evaluate ``expr`` over a binding of variables to versions.

    Keys of ``binding`` are variable names (element versions) or
    ``(var, key)`` pairs (property versions).
    """
    row = Row({k: v for k, v in binding.items() if isinstance(k, str)},
              {k: v for k, v in binding.items() if isinstance(k, tuple)})
    return Evaluator(eval_instant)(expr, row)


def apply_aggregates(rows: list[dict], group_by: tuple, items: tuple, eval_instant: int = 0) -> ResultTable:
    """Aggregate binding dicts like :func:`evaluate_scalar` takes them.

    ``items`` is a sequence of ``(expr, column name)`` pairs.
    """
    aggs = []
    for e, _ in items:
        for x in A.walk(e):
            if isinstance(x, A.Aggregate) and x not in aggs:
                aggs.append(x)
    node = Aggregate(None, tuple(group_by), tuple(aggs))
    ev = Evaluator(eval_instant)
    row_objs = [Row({k: v for k, v in b.items() if isinstance(k, str)},
                    {k: v for k, v in b.items() if isinstance(k, tuple)}) for b in rows]
    groups = _aggregate_rows(node, row_objs, ev)
    return ResultTable(tuple(c for _, c in items), [tuple(ev(e, g) for e, _ in items) for g in groups])


def _aggregate_rows(node: Aggregate, rows, ev: Evaluator) -> list[GroupRow]:
    groups: dict[tuple, tuple[list, list[_Acc]]] = {}
    for r in rows:
        vals = [ev(g, r) for g in node.group_by]
        key = tuple(value_key(v) for v in vals)
        slot = groups.get(key)
        if slot is None:
            slot = (vals, [_Acc(a) for a in node.aggregates])
            groups[key] = slot
        for acc in slot[1]:
            acc.add(None if acc.agg.arg is None else ev(acc.agg.arg, r))
    return [GroupRow(dict(zip(node.group_by, vals)), {acc.agg: acc.result() for acc in accs})
            for vals, accs in groups.values()]
