"""Render AST nodes back to T-PGQL text."""
from __future__ import annotations

from . import ast as A

_PREC = {"OR": 1, "AND": 2, "NOT": 3,
         "=": 4, "<>": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def _prec(e: A.Expr) -> int:
    if isinstance(e, A.Binary):
        return _PREC[e.op]
    if isinstance(e, A.Unary):
        return 3 if e.op == "NOT" else 7
    if isinstance(e, (A.TemporalPredicate, A.IsNull)):
        return 4
    if isinstance(e, A.Literal) and type(e.value) in (int, float) and e.value < 0:
        return 7
    return 8


def _wrap(e: A.Expr, min_prec: int) -> str:
    s = expr_to_text(e)
    return f"({s})" if _prec(e) < min_prec else s


def _literal(v) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v)


def expr_to_text(e: A.Expr) -> str:
    if isinstance(e, A.Literal):
        return _literal(e.value)
    if isinstance(e, A.TemporalLiteral):
        return f"{e.kind} {_literal(e.text)}"
    if isinstance(e, A.CurrentTimestamp):
        return "CURRENT_TIMESTAMP"
    if isinstance(e, A.VarRef):
        return e.name
    if isinstance(e, A.PropRef):
        return f"{e.var}.{e.key}"
    if isinstance(e, A.TimeRef):
        ident = e.spelling or e.ident
        return f"{e.var}.{ident}" if e.key is None else f"{e.var}.{e.key}.{ident}"
    if isinstance(e, A.PeriodCtor):
        return f"PERIOD({expr_to_text(e.start)}, {expr_to_text(e.end)})"
    if isinstance(e, A.Length):
        unit = f"{e.unit}, " if e.unit else ""
        return f"LENGTH({unit}{expr_to_text(e.arg)})"
    if isinstance(e, A.Binary):
        p = _PREC[e.op]
        # comparisons do not chain; arithmetic and logic are left-associative
        lp = p + 1 if p == 4 else p
        return f"{_wrap(e.left, lp)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, A.Unary):
        if e.op == "NOT":
            return f"NOT {_wrap(e.operand, 3)}"
        return f"-{_wrap(e.operand, 8)}"
    if isinstance(e, A.IsNull):
        return f"{_wrap(e.operand, 5)} IS {'NOT ' if e.negated else ''}NULL"
    if isinstance(e, A.TemporalPredicate):
        op = f"IMMEDIATELY {e.op}" if e.immediately else e.op
        return f"{_wrap(e.left, 5)} {op} {_wrap(e.right, 5)}"
    if isinstance(e, A.Aggregate):
        if e.arg is None:
            return f"{e.func}(*)"
        return f"{e.func}({'DISTINCT ' if e.distinct else ''}{expr_to_text(e.arg)})"
    if isinstance(e, A.FuncCall):
        return f"{e.name}({', '.join(expr_to_text(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def _labels(labels) -> str:
    return (":" + "|".join(labels)) if labels else ""


def pattern_to_text(p: A.PathPattern) -> str:
    out = []
    for t in p.terms:
        if isinstance(t, A.VertexTerm):
            out.append(f"({t.var or ''}{_labels(t.labels)})")
        else:
            body = f"[{t.var or ''}{_labels(t.labels)}]"
            out.append(f"-{body}->" if t.direction == "OUT" else f"<-{body}-")
    return "".join(out)


def tx_to_text(tx: A.TxCond) -> str:
    if tx.mode == "DEFAULT":
        return ""
    if tx.mode == "ALL":
        return "FOR TX_TIME ALL"
    a = [_wrap(x, 5) for x in tx.args]
    if tx.mode == "AS_OF":
        return f"FOR TX_TIME AS OF {a[0]}"
    if tx.mode == "FROM_TO":
        return f"FOR TX_TIME FROM {a[0]} TO {a[1]}"
    return f"FOR TX_TIME BETWEEN {a[0]} AND {a[1]}"


def match_to_text(m: A.MatchClause) -> str:
    if m.grouped or len(m.patterns) > 1:
        body = "(" + ", ".join(pattern_to_text(p) for p in m.patterns) + ")"
    else:
        body = pattern_to_text(m.patterns[0])
    parts = ["MATCH", body]
    if m.graph:
        parts += ["ON", m.graph]
    tx = tx_to_text(m.tx)
    if tx:
        parts.append(tx)
    return " ".join(parts)


def to_text(q: A.Query) -> str:
    """Canonical single-statement text of ``q``."""
    lines = []
    sel = "SELECT DISTINCT " if q.distinct else "SELECT "
    if q.items is None:
        sel += "*"
    else:
        sel += ", ".join(expr_to_text(i.expr) + (f" AS {i.alias}" if i.alias else "") for i in q.items)
    lines.append(sel)
    lines.append("FROM " + ",\n     ".join(match_to_text(m) for m in q.matches))
    if q.where is not None:
        lines.append("WHERE " + expr_to_text(q.where))
    if q.group_by:
        lines.append("GROUP BY " + ", ".join(expr_to_text(g) for g in q.group_by))
    if q.having is not None:
        lines.append("HAVING " + expr_to_text(q.having))
    if q.order_by:
        lines.append("ORDER BY " + ", ".join(
            expr_to_text(o.expr) + (" DESC" if o.descending else "") for o in q.order_by))
    if q.limit is not None:
        lines.append(f"LIMIT {q.limit}")
    return "\n".join(lines)
