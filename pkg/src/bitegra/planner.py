"""Lower a validated query to a logical plan over the storage catalog."""
from __future__ import annotations

from dataclasses import dataclass, field

from .chronos import format_timestamp
from .storage.schema import COLUMN, property_table_name
from .storage.tables import EDGE, VERTEX
from .tpgql import ast as A
from .tpgql.printer import expr_to_text


class PlanNode:
    __slots__ = ()


@dataclass(frozen=True)
class TxSpec:
    mode: str  # AS_OF | FROM_TO | BETWEEN | ALL
    args: tuple = ()
    default: bool = False  # came from an omitted FOR clause


@dataclass(frozen=True)
class TableAccess(PlanNode):
    var: str
    kind: str  # VERTEX | EDGE
    labels: tuple | None
    tables: tuple  # ((table, needs_label_filter), ...)
    tx: TxSpec
    clause: int


@dataclass(frozen=True)
class Join(PlanNode):
    """Extend every left row with versions of ``right``.

    ``anchor``/``on`` give the adjacency: for an edge access, ``on`` names the
    edge end that must equal the bound vertex ``anchor``; for a vertex
    access, ``on`` names the end of the bound edge ``anchor`` the vertex is.
    Without an anchor the join is a cross product.
    """

    left: PlanNode | None
    right: TableAccess
    anchor: str | None = None
    on: str | None = None  # "src" | "dst"


@dataclass(frozen=True)
class EndpointCheck(PlanNode):
    """Adjacency between two already bound variables: ``edge.<end> = vertex.id``."""

    child: PlanNode
    edge: str
    end: str
    vertex: str


@dataclass(frozen=True)
class LabelCheck(PlanNode):
    child: PlanNode
    var: str
    labels: tuple


@dataclass(frozen=True)
class PropertyBind(PlanNode):
    child: PlanNode
    var: str
    key: str
    clause: int
    placements: tuple  # ((owner label, "column" | "table", table), ...)


@dataclass(frozen=True)
class Filter(PlanNode):
    child: PlanNode
    predicate: A.Expr


@dataclass(frozen=True)
class Aggregate(PlanNode):
    child: PlanNode
    group_by: tuple
    aggregates: tuple


@dataclass(frozen=True)
class Project(PlanNode):
    child: PlanNode
    items: tuple  # ((expr, column name), ...)


@dataclass(frozen=True)
class Distinct(PlanNode):
    child: PlanNode


@dataclass(frozen=True)
class Sort(PlanNode):
    child: PlanNode
    keys: tuple  # ((expr, descending), ...)


@dataclass(frozen=True)
class Limit(PlanNode):
    child: PlanNode
    count: int


@dataclass(frozen=True)
class Empty(PlanNode):
    """A pattern that can never match (e.g., contradictory labels)."""


@dataclass(frozen=True)
class LogicalPlan:
    root: PlanNode
    match: PlanNode  # structural part (accesses, joins and checks only)
    columns: tuple
    graph: str
    query: A.Query = field(compare=False)
    uses_current_timestamp: bool = False
    tables: frozenset = frozenset()  # every table the plan reads

    def explain(self) -> str:
        return explain(self.root)


def _tx_spec(tx: A.TxCond) -> TxSpec:
    if tx.mode == "DEFAULT":
        return TxSpec("AS_OF", (A.CurrentTimestamp(),), True)
    return TxSpec(tx.mode, tx.args)


def column_names(q: A.Query, star_vars=()) -> tuple[str, ...]:
    if q.items is None:
        raw = list(star_vars)
    else:
        raw = []
        for it in q.items:
            if it.alias:
                raw.append(it.alias)
            elif isinstance(it.expr, A.PropRef):
                raw.append(it.expr.key)
            else:
                raw.append(expr_to_text(it.expr))
    seen: dict[str, int] = {}
    out = []
    for name in raw:
        if name in seen:
            seen[name] += 1
            cand = f"{name}_{seen[name]}"
            while cand in seen:
                seen[name] += 1
                cand = f"{name}_{seen[name]}"
            seen[cand] = 1
            out.append(cand)
        else:
            seen[name] = 1
            out.append(name)
    return tuple(out)


def _conjuncts(e: A.Expr | None) -> list[A.Expr]:
    if e is None:
        return []
    if isinstance(e, A.Binary) and e.op == "AND":
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _prop_deps(e: A.Expr) -> list[tuple[str, str]]:
    out = []
    for x in A.walk(e):
        if isinstance(x, A.PropRef) or (isinstance(x, A.TimeRef) and x.key is not None):
            k = (x.var, x.key)
            if k not in out:
                out.append(k)
    return out


def _substitute(e: A.Expr, aliases: dict[str, A.Expr], bound: set) -> A.Expr:
    if isinstance(e, A.VarRef) and e.name in aliases and e.name not in bound:
        return aliases[e.name]
    kids = A.children(e)
    if not kids:
        return e
    new = [_substitute(k, aliases, bound) for k in kids]
    if isinstance(e, A.PeriodCtor):
        return A.PeriodCtor(*new)
    if isinstance(e, A.Length):
        return A.Length(e.unit, new[0])
    if isinstance(e, A.Binary):
        return A.Binary(e.op, *new)
    if isinstance(e, A.TemporalPredicate):
        return A.TemporalPredicate(e.op, new[0], new[1], e.immediately)
    if isinstance(e, A.Unary):
        return A.Unary(e.op, new[0])
    if isinstance(e, A.IsNull):
        return A.IsNull(new[0], e.negated)
    if isinstance(e, A.Aggregate):
        return A.Aggregate(e.func, new[0], e.distinct)
    if isinstance(e, A.FuncCall):
        return A.FuncCall(e.name, tuple(new))
    return e


def plan(q: A.Query, store) -> LogicalPlan:
    """Build the plan of ``q`` against the catalog of ``store``.

    Labels unknown to the catalog resolve to empty table sets, so such
    patterns simply produce no matches.
    """
    anon = iter(range(1, 1 << 30))
    node: PlanNode | None = None
    var_kind: dict[str, str] = {}
    var_clause: dict[str, int] = {}
    var_labels: dict[str, tuple | None] = {}
    pending = [c for c in _conjuncts(q.where)]
    element_filters = [c for c in pending if not _prop_deps(c)]
    prop_filters = [c for c in pending if _prop_deps(c)]
    touched: set[str] = set()

    def place_element_filters():
        nonlocal node
        for c in list(element_filters):
            if A.variables(c) <= set(var_kind):
                node = Filter(node, c)
                element_filters.remove(c)

    def access(var, kind, labels, clause, tx, src_labels=None, dst_labels=None):
        tables = tuple(store.tables_for(kind, labels, src_labels, dst_labels))
        touched.update(t for t, _ in tables)
        var_kind[var] = kind
        var_clause[var] = clause
        var_labels[var] = labels
        return TableAccess(var, kind, labels, tables, tx, clause)

    for ci, m in enumerate(q.matches):
        tx = _tx_spec(m.tx)
        for p in m.patterns:
            terms = list(p.terms)
            names = [t.var or f"_anon{next(anon)}" for t in terms]
            # first vertex
            v0, n0 = terms[0], names[0]
            if n0 in var_kind:
                if v0.labels:
                    node = LabelCheck(node, n0, v0.labels)
            else:
                node = Join(node, access(n0, VERTEX, v0.labels or None, ci, tx))
            place_element_filters()
            for k in range(1, len(terms), 2):
                e, ne = terms[k], names[k]
                v, nv = terms[k + 1], names[k + 1]
                prev = names[k - 1]
                near, far = ("src", "dst") if e.direction == "OUT" else ("dst", "src")
                if ne in var_kind:
                    node = EndpointCheck(node, ne, near, prev)
                    if e.labels:
                        node = LabelCheck(node, ne, e.labels)
                else:
                    src_l = dst_l = None
                    pl = var_labels.get(prev)
                    if near == "src":
                        src_l, dst_l = pl, (v.labels or None)
                    else:
                        src_l, dst_l = (v.labels or None), pl
                    node = Join(node, access(ne, EDGE, e.labels or None, ci, tx, src_l, dst_l), prev, near)
                place_element_filters()
                if nv in var_kind:
                    node = EndpointCheck(node, ne, far, nv)
                    if v.labels:
                        node = LabelCheck(node, nv, v.labels)
                else:
                    node = Join(node, access(nv, VERTEX, v.labels or None, ci, tx), ne, far)
                place_element_filters()
    match_node = node
    for c in element_filters:  # constant conjuncts
        node = Filter(node, c)

    # property binds in order of first appearance
    exprs: list[A.Expr] = []
    if q.items is not None:
        exprs += [i.expr for i in q.items]
    exprs += [c for c in _conjuncts(q.where)]
    exprs += list(q.group_by)
    if q.having is not None:
        exprs.append(q.having)
    exprs += [o.expr for o in q.order_by]
    binds: list[tuple[str, str]] = []
    for e in exprs:
        for d in _prop_deps(e):
            if d not in binds:
                binds.append(d)
    bound_props: set = set()
    for var, key in binds:
        node = PropertyBind(node, var, key, var_clause[var], _placements(store, var_kind[var], var_labels[var], key, touched))
        bound_props.add((var, key))
        for c in list(prop_filters):
            if set(_prop_deps(c)) <= bound_props:
                node = Filter(node, c)
                prop_filters.remove(c)

    aliases = {} if q.items is None else {i.alias: i.expr for i in q.items if i.alias}
    bound_vars = set(var_kind)
    star_vars = [v for v in var_kind if not v.startswith("_anon")]
    items = (tuple(A.VarRef(v) for v in star_vars) if q.items is None
             else tuple(i.expr for i in q.items))
    names = column_names(q, star_vars)
    aggregated = bool(q.group_by) or any(A.contains_aggregate(e) for e in items)
    if aggregated:
        groups = tuple(_substitute(g, aliases, bound_vars) for g in q.group_by)
        having = _substitute(q.having, aliases, bound_vars) if q.having is not None else None
        aggs = []
        for e in list(items) + ([having] if having is not None else []) + [
                _substitute(o.expr, aliases, bound_vars) for o in q.order_by]:
            for x in A.walk(e):
                if isinstance(x, A.Aggregate) and x not in aggs:
                    aggs.append(x)
        node = Aggregate(node, groups, tuple(aggs))
        if having is not None:
            node = Filter(node, having)
    if q.order_by:
        node = Sort(node, tuple((_substitute(o.expr, aliases, bound_vars), o.descending) for o in q.order_by))
    node = Project(node, tuple(zip(items, names)))
    if q.distinct:
        node = Distinct(node)
    if q.limit is not None:
        node = Limit(node, q.limit)
    uses_now = any(isinstance(x, A.CurrentTimestamp)
                   for e in exprs + [a for m in q.matches for a in m.tx.args] for x in A.walk(e))
    return LogicalPlan(node, match_node, names, store.name, q, uses_now, frozenset(touched))


def _placements(store, kind: str, labels, key: str, touched: set) -> tuple:
    out = []
    tables = store.tables_for(kind, labels)
    for tname, _ in tables:
        t = store.tables[tname]
        owner_labels = [t.label] if t.label is not None else (
            list(labels) if labels is not None else
            sorted({lb for (kd, lb, k) in store.prop_placements if kd == kind and k == key}))
        for lb in owner_labels:
            p = store.prop_placements.get((kind, lb, key))
            if p is None:
                continue
            target = tname if p == COLUMN else property_table_name(tname)
            touched.add(target)
            out.append((lb, p, target))
    return tuple(out)


# -- explain ------------------------------------------------------------------


def _node_children(n: PlanNode) -> list[PlanNode]:
    if isinstance(n, Join):
        return [n.left] if n.left is not None else []
    for attr in ("child",):
        c = getattr(n, attr, None)
        if c is not None:
            return [c]
    return []


def _node_line(n: PlanNode) -> str:
    if isinstance(n, Join):
        a = n.right
        tabs = ", ".join(t for t, _ in a.tables) or "<none>"
        on = f" on {a.var}.{'id' if a.kind == VERTEX else n.on} = " \
             f"{n.anchor}.{n.on if a.kind == VERTEX else 'id'}" if n.anchor else ""
        return f"Join{on} <- TableAccess {a.var}:{a.kind.lower()} [{tabs}] tx={_tx_text(a.tx)}"
    if isinstance(n, EndpointCheck):
        return f"EndpointCheck {n.edge}.{n.end} = {n.vertex}.id"
    if isinstance(n, LabelCheck):
        return f"LabelCheck {n.var} in {'|'.join(n.labels)}"
    if isinstance(n, PropertyBind):
        pl = ", ".join(f"{lb}:{p}@{t}" for lb, p, t in n.placements) or "<absent>"
        return f"PropertyBind {n.var}.{n.key} [{pl}]"
    if isinstance(n, Filter):
        return f"Filter {expr_to_text(n.predicate)}"
    if isinstance(n, Aggregate):
        g = ", ".join(expr_to_text(x) for x in n.group_by)
        a = ", ".join(expr_to_text(x) for x in n.aggregates)
        return f"Aggregate group=[{g}] aggs=[{a}]"
    if isinstance(n, Project):
        return "Project " + ", ".join(f"{expr_to_text(e)} AS {c}" for e, c in n.items)
    if isinstance(n, Sort):
        return "Sort " + ", ".join(expr_to_text(e) + (" DESC" if d else "") for e, d in n.keys)
    if isinstance(n, Limit):
        return f"Limit {n.count}"
    return type(n).__name__


def explain(n: PlanNode | None, depth: int = 0) -> str:
    if n is None:
        return ""
    lines = ["  " * depth + _node_line(n)]
    for c in _node_children(n):
        sub = explain(c, depth + 1)
        if sub:
            lines.append(sub)
    return "\n".join(lines)


def _tx_text(tx: TxSpec) -> str:
    if tx.mode == "ALL":
        return "ALL"
    args = " ".join(expr_to_text(a) for a in tx.args)
    return f"{tx.mode}({args})"


# -- SQL emission -----------------------------------------------------------


def _sql_time(e: A.Expr) -> str:
    if isinstance(e, A.TemporalLiteral):
        return f"TIMESTAMP '{format_timestamp(e.value, 'full')}'"
    if isinstance(e, A.CurrentTimestamp):
        return "CURRENT_TIMESTAMP"
    return expr_to_text(e)


def _tx_sql(alias: str, tx: TxSpec) -> list[str]:
    if tx.mode == "ALL":
        return []
    if tx.mode == "AS_OF":
        t = _sql_time(tx.args[0])
        return [f"{alias}.tx_from <= {t}", f"{alias}.tx_to > {t}"]
    lo, hi = (_sql_time(a) for a in tx.args)
    if tx.mode == "BETWEEN":
        return [f"{alias}.tx_from <= {hi}", f"{alias}.tx_to > {lo}"]
    return [f"{alias}.tx_from < {hi}", f"{alias}.tx_to > {lo}"]


class _SqlBuilder:
    def __init__(self):
        self.from_parts: list[str] = []
        self.where: list[str] = []
        self.prop_cols: dict[tuple[str, str], str] = {}
        self.tx_of: dict[str, TxSpec] = {}
        self._n = 0

    def source(self, access: TableAccess) -> str:
        if not access.tables:
            return None
        if len(access.tables) == 1:
            name, flt = access.tables[0]
            if flt:
                self.where.append(_label_sql(access.var, access.labels))
            return f"{name} AS {access.var}"
        parts = []
        for name, flt in access.tables:
            sel = f"SELECT * FROM {name}"
            if flt:
                sel += " WHERE " + _label_sql(None, access.labels)
            parts.append(sel)
        return "(" + " UNION ALL ".join(parts) + f") AS {access.var}"

    def expr(self, e: A.Expr) -> str:
        if isinstance(e, A.PropRef):
            return self.prop_cols.get((e.var, e.key), "NULL")
        if isinstance(e, A.TimeRef):
            base = e.var if e.key is None else self.prop_cols.get((e.var, e.key), "NULL").rsplit(".", 1)[0]
            if e.key is not None and base == "NULL":
                return "NULL"
            pre = "val" if e.ident.startswith("VAL") else "tx"
            if e.ident.endswith("_TIME"):
                return f"PERIOD({base}.{pre}_from, {base}.{pre}_to)"
            return f"{base}.{e.ident.lower()}"
        if isinstance(e, A.VarRef):
            return f"{e.name}.id"
        if isinstance(e, (A.TemporalLiteral, A.CurrentTimestamp)):
            return _sql_time(e)
        if isinstance(e, A.Literal):
            return expr_to_text(e)
        if isinstance(e, A.Binary):
            return f"({self.expr(e.left)} {e.op} {self.expr(e.right)})"
        if isinstance(e, A.Unary):
            return f"({e.op} {self.expr(e.operand)})"
        if isinstance(e, A.IsNull):
            return f"({self.expr(e.operand)} IS {'NOT ' if e.negated else ''}NULL)"
        if isinstance(e, A.PeriodCtor):
            return f"PERIOD({self.expr(e.start)}, {self.expr(e.end)})"
        if isinstance(e, A.Length):
            return f"LENGTH({e.unit or 'MILLISECOND'}, {self.expr(e.arg)})"
        if isinstance(e, A.TemporalPredicate):
            return self._predicate(e)
        if isinstance(e, A.Aggregate):
            if e.arg is None:
                return "COUNT(*)"
            fn = {"FIRST": "MIN", "LAST": "MAX"}.get(e.func, e.func)
            return f"{fn}({'DISTINCT ' if e.distinct else ''}{self.expr(e.arg)})"
        if isinstance(e, A.FuncCall):
            arg = e.args[0]
            return f"{arg.name}.{'id' if e.name == 'ID' else 'label'}"
        return expr_to_text(e)

    def _bounds(self, e: A.Expr) -> tuple[str, str] | None:
        if isinstance(e, A.TimeRef) and e.is_period:
            if e.key is None:
                base = e.var
            else:
                col = self.prop_cols.get((e.var, e.key))
                if col is None:
                    return ("NULL", "NULL")
                base = col.rsplit(".", 1)[0]
            pre = "val" if e.ident == "VAL_TIME" else "tx"
            return f"{base}.{pre}_from", f"{base}.{pre}_to"
        if isinstance(e, A.PeriodCtor):
            return self.expr(e.start), self.expr(e.end)
        return None

    def _predicate(self, e: A.TemporalPredicate) -> str:
        lb = self._bounds(e.left)
        rb = self._bounds(e.right)
        if lb is None:
            return f"({self.expr(e.left)} {e.op} {self.expr(e.right)})"
        (a0, a1) = lb
        if e.op == "CONTAINS" and rb is None:
            t = self.expr(e.right)
            return f"({a0} <= {t} AND {a1} > {t})"
        if rb is None:
            return f"({self.expr(e.left)} {e.op} {self.expr(e.right)})"
        b0, b1 = rb
        if e.op == "CONTAINS":
            return f"({a0} <= {b0} AND {a1} >= {b1} AND {b0} < {b1})"
        if e.op == "OVERLAPS":
            return f"({a0} < {b1} AND {b0} < {a1})"
        if e.op == "EQUALS":
            return f"({a0} = {b0} AND {a1} = {b1})"
        if e.op == "PRECEDES":
            return f"({a1} = {b0})" if e.immediately else f"({a1} <= {b0})"
        return f"({a0} = {b1})" if e.immediately else f"({a0} >= {b1})"


def _label_sql(var: str | None, labels) -> str:
    col = f"{var}.label" if var else "label"
    if len(labels) == 1:
        return f"{col} = '{labels[0]}'"
    return f"{col} IN (" + ", ".join(f"'{lb}'" for lb in labels) + ")"


def _linear(n: PlanNode) -> list[PlanNode]:
    out = []
    while n is not None:
        out.append(n)
        kids = _node_children(n)
        n = kids[0] if kids else None
    return list(reversed(out))


def emit_sql(p: LogicalPlan) -> str:
    """Diagnostic ANSI-style SELECT equivalent to ``p`` (never executed)."""
    b = _SqlBuilder()
    nodes = _linear(p.root)
    empty = False
    select_items: list[str] = []
    group_sql: list[str] = []
    having: list[str] = []
    order: list[str] = []
    limit = None
    distinct = False
    for n in nodes:
        if isinstance(n, Join):
            a = n.right
            src = b.source(a)
            if src is None:
                empty = True
                continue
            kw = "FROM" if not b.from_parts else "JOIN"
            cond = []
            if n.anchor:
                if a.kind == EDGE:
                    cond.append(f"{a.var}.{n.on} = {n.anchor}.id")
                else:
                    cond.append(f"{a.var}.id = {n.anchor}.{n.on}")
            cond += _tx_sql(a.var, a.tx)
            if kw == "FROM":
                b.from_parts.append(f"FROM {src}")
                b.where.extend(cond)
            elif cond:
                b.from_parts.append(f"JOIN {src} ON " + " AND ".join(cond))
            else:
                b.from_parts.append(f"CROSS JOIN {src}")
            b.tx_of[a.var] = a.tx
        elif isinstance(n, EndpointCheck):
            b.where.append(f"{n.edge}.{n.end} = {n.vertex}.id")
        elif isinstance(n, LabelCheck):
            b.where.append(_label_sql(n.var, n.labels))
        elif isinstance(n, PropertyBind):
            tx = b.tx_of.get(n.var, TxSpec("ALL"))
            cols = []
            for lb, placement, table in n.placements:
                if placement == COLUMN:
                    cols.append(f"{n.var}.{n.key}")
                    continue
                b._n += 1
                alias = f"p{b._n}"
                cond = [f"{alias}.id = {n.var}.id", f"{alias}.key = '{n.key}'"] + _tx_sql(alias, tx)
                b.from_parts.append(f"LEFT JOIN {table} AS {alias} ON " + " AND ".join(cond))
                cols.append(f"{alias}.value")
            if not cols:
                b.prop_cols[(n.var, n.key)] = "NULL"
            elif len(cols) == 1:
                b.prop_cols[(n.var, n.key)] = cols[0]
            else:
                b.prop_cols[(n.var, n.key)] = "COALESCE(" + ", ".join(dict.fromkeys(cols)) + ")"
        elif isinstance(n, Filter):
            target = having if any(isinstance(x, Aggregate) for x in nodes[:nodes.index(n)]) else b.where
            target.append(b.expr(n.predicate))
        elif isinstance(n, Aggregate):
            group_sql = [b.expr(g) for g in n.group_by]
        elif isinstance(n, Sort):
            order = [b.expr(e) + (" DESC" if d else "") for e, d in n.keys]
        elif isinstance(n, Project):
            select_items = [f"{b.expr(e)} AS {_quote(c)}" for e, c in n.items]
        elif isinstance(n, Distinct):
            distinct = True
        elif isinstance(n, Limit):
            limit = n.count
    lines = [("SELECT DISTINCT " if distinct else "SELECT ") + (", ".join(select_items) or "*")]
    if empty or not b.from_parts:
        lines.append("FROM (SELECT 1) AS empty")
        lines.append("WHERE FALSE")
    else:
        lines += b.from_parts
        if b.where:
            lines.append("WHERE " + "\n  AND ".join(b.where))
    if group_sql:
        lines.append("GROUP BY " + ", ".join(group_sql))
    if having:
        lines.append("HAVING " + " AND ".join(having))
    if order:
        lines.append("ORDER BY " + ", ".join(order))
    if limit is not None:
        lines.append(f"LIMIT {limit}")
    return "\n".join(lines)


def _quote(name: str) -> str:
    if name.replace("_", "").isalnum() and not name[0].isdigit():
        return name
    return '"' + name.replace('"', '""') + '"'
