"""Immutable syntax tree of a T-PGQL query."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..chronos import parse_timestamp

TIME_IDS = ("TX_TIME", "VAL_TIME", "TX_FROM", "TX_TO", "VAL_FROM", "VAL_TO")
TIME_ALIASES = {"VALID_TIME": "VAL_TIME"}
PERIOD_IDS = ("TX_TIME", "VAL_TIME")
AGGREGATES = ("COUNT", "MIN", "MAX", "SUM", "AVG", "FIRST", "LAST")
FUNCTIONS = ("ID", "LABEL")
PREDICATES = ("OVERLAPS", "EQUALS", "CONTAINS", "PRECEDES", "SUCCEEDS")


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Literal(Expr):
    value: object  # str | int | float | bool | None

    def __eq__(self, other):
        # 1 and True must stay distinct nodes
        return (isinstance(other, Literal) and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash((type(self.value), self.value))


@dataclass(frozen=True)
class TemporalLiteral(Expr):
    kind: str  # DATE | TIMESTAMP
    text: str

    @property
    def value(self) -> int:
        return parse_timestamp(self.text)


@dataclass(frozen=True)
class CurrentTimestamp(Expr):
    pass


@dataclass(frozen=True)
class VarRef(Expr):
    name: str


@dataclass(frozen=True)
class PropRef(Expr):
    var: str
    key: str


@dataclass(frozen=True)
class TimeRef(Expr):
    """``var.ID`` (``key`` is None) or ``var.key.ID``."""

    var: str
    key: str | None
    ident: str
    spelling: str = field(default="", compare=False)

    @property
    def is_period(self) -> bool:
        return self.ident in PERIOD_IDS


@dataclass(frozen=True)
class PeriodCtor(Expr):
    start: Expr
    end: Expr


@dataclass(frozen=True)
class Length(Expr):
    unit: str | None
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # = <> < <= > >= + - * / % AND OR
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # NOT | -
    operand: Expr


@dataclass(frozen=True)
class IsNull(Expr):
    operand: Expr
    negated: bool = False


@dataclass(frozen=True)
class TemporalPredicate(Expr):
    op: str  # one of PREDICATES
    left: Expr
    right: Expr
    immediately: bool = False


@dataclass(frozen=True)
class Aggregate(Expr):
    func: str
    arg: Expr | None  # None for COUNT(*)
    distinct: bool = False


@dataclass(frozen=True)
class FuncCall(Expr):
    name: str
    args: tuple


# -- patterns ------------------------------------------------------------------


@dataclass(frozen=True)
class VertexTerm:
    var: str | None
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class EdgeTerm:
    var: str | None
    labels: tuple[str, ...] = ()
    direction: str = "OUT"  # OUT | IN


@dataclass(frozen=True)
class PathPattern:
    terms: tuple  # VertexTerm (EdgeTerm VertexTerm)*

    @property
    def vertices(self) -> tuple[VertexTerm, ...]:
        return self.terms[0::2]

    @property
    def edges(self) -> tuple[EdgeTerm, ...]:
        return self.terms[1::2]


@dataclass(frozen=True)
class TxCond:
    mode: str  # AS_OF | FROM_TO | BETWEEN | ALL | DEFAULT
    args: tuple = ()


DEFAULT_TX = TxCond("DEFAULT")


@dataclass(frozen=True)
class MatchClause:
    patterns: tuple[PathPattern, ...]
    graph: str | None = None
    tx: TxCond = DEFAULT_TX
    grouped: bool = False  # written as a parenthesised graph pattern


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class Query:
    items: tuple[SelectItem, ...] | None  # None means SELECT *
    matches: tuple[MatchClause, ...]
    distinct: bool = False
    where: Expr | None = None
    group_by: tuple[Expr, ...] = ()
    having: Expr | None = None
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None

    @property
    def graph(self) -> str | None:
        for m in self.matches:
            if m.graph:
                return m.graph
        return None


def children(e: Expr) -> tuple:
    if isinstance(e, (PeriodCtor,)):
        return (e.start, e.end)
    if isinstance(e, Length):
        return (e.arg,)
    if isinstance(e, (Binary, TemporalPredicate)):
        return (e.left, e.right)
    if isinstance(e, (Unary, IsNull)):
        return (e.operand,)
    if isinstance(e, Aggregate):
        return () if e.arg is None else (e.arg,)
    if isinstance(e, FuncCall):
        return tuple(e.args)
    return ()


def walk(e: Expr):
    yield e
    for c in children(e):
        yield from walk(c)


def contains_aggregate(e: Expr) -> bool:
    return any(isinstance(x, Aggregate) for x in walk(e))


def variables(e: Expr) -> set[str]:
    out = set()
    for x in walk(e):
        if isinstance(x, (VarRef,)):
            out.add(x.name)
        elif isinstance(x, (PropRef, TimeRef)):
            out.add(x.var)
    return out
