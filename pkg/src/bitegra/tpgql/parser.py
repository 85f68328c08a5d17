"""Recursive-descent parser and static validator for T-PGQL."""
from __future__ import annotations

from ..chronos import ChronosError, TimeUnit, parse_timestamp
from ..errors import ParseError, ValidationError
from . import ast as A
from .lexer import Token, tokenize

_UNITS = {u.value for u in TimeUnit}
_COMPARISON = ("=", "<>", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers ---------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "EOF" else repr(tok.value)
        return ParseError(f"{msg}, found {found}", tok.pos)

    def expect_kw(self, *words: str) -> Token:
        if not self.tok.is_kw(*words):
            raise self.error(f"expected {' or '.join(words)}")
        return self.advance()

    def expect_punct(self, sym: str) -> Token:
        if not self.tok.is_punct(sym):
            raise self.error(f"expected {sym!r}")
        return self.advance()

    def accept_kw(self, *words: str) -> bool:
        if self.tok.is_kw(*words):
            self.advance()
            return True
        return False

    def accept_punct(self, sym: str) -> bool:
        if self.tok.is_punct(sym):
            self.advance()
            return True
        return False

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "IDENT":
            raise self.error(f"expected {what}")
        return self.advance().value

    def name(self, what: str = "name") -> str:
        """Identifier or keyword used as a label or property name."""
        if self.tok.kind in ("IDENT", "KW"):
            t = self.advance()
            return t.value if t.kind == "IDENT" else self._raw(t)
        raise self.error(f"expected {what}")

    def _raw(self, tok: Token) -> str:
        # keywords are upper-cased by the lexer; recover the original spelling
        text = self._text
        j = tok.pos
        while j < len(text) and (text[j].isalnum() or text[j] == "_"):
            j += 1
        return text[tok.pos:j]

    # -- query -----------------------------------------------------------------

    def parse(self, text: str) -> A.Query:
        from .lexer import normalize
        self._text = normalize(text)
        self.expect_kw("SELECT")
        distinct = self.accept_kw("DISTINCT")
        if self.accept_punct("*"):
            items = None
        else:
            items = [self.select_item()]
            while self.accept_punct(","):
                items.append(self.select_item())
            items = tuple(items)
        self.expect_kw("FROM")
        matches = [self.match_clause()]
        while self.tok.is_punct(",") and self.peek().is_kw("MATCH"):
            self.advance()
            matches.append(self.match_clause())
        where = group_by = having = None
        order_by, limit = (), None
        if self.accept_kw("WHERE"):
            where = self.expr()
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            group_by = [self.expr()]
            while self.accept_punct(","):
                group_by.append(self.expr())
        if self.accept_kw("HAVING"):
            having = self.expr()
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            order_by = [self.order_item()]
            while self.accept_punct(","):
                order_by.append(self.order_item())
        if self.accept_kw("LIMIT"):
            if self.tok.kind != "INT":
                raise self.error("expected integer after LIMIT")
            limit = self.advance().value
        self.accept_punct(";")
        if self.tok.kind != "EOF":
            raise self.error("unexpected trailing input")
        return A.Query(items, tuple(matches), distinct, where, tuple(group_by or ()),
                       having, tuple(order_by), limit)

    def select_item(self) -> A.SelectItem:
        e = self.expr()
        alias = None
        if self.accept_kw("AS"):
            alias = self.name("alias")
        return A.SelectItem(e, alias)

    def order_item(self) -> A.OrderItem:
        e = self.expr()
        desc = False
        if self.accept_kw("DESC"):
            desc = True
        else:
            self.accept_kw("ASC")
        return A.OrderItem(e, desc)

    # -- MATCH -----------------------------------------------------------------

    def match_clause(self) -> A.MatchClause:
        self.expect_kw("MATCH")
        grouped = self.tok.is_punct("(") and self.peek().is_punct("(")
        if grouped:
            self.advance()
            patterns = [self.path_pattern()]
            while self.accept_punct(","):
                patterns.append(self.path_pattern())
            self.expect_punct(")")
        else:
            patterns = [self.path_pattern()]
        graph, tx = None, A.DEFAULT_TX
        for _ in range(2):
            if graph is None and self.accept_kw("ON"):
                graph = self.name("graph name")
            elif tx is A.DEFAULT_TX and self.tok.is_kw("FOR"):
                tx = self.tx_cond()
        return A.MatchClause(tuple(patterns), graph, tx, grouped)

    def tx_cond(self) -> A.TxCond:
        self.expect_kw("FOR")
        t = self.tok
        if not (t.kind == "IDENT" and t.value.upper() == "TX_TIME"):
            raise self.error("expected TX_TIME after FOR")
        self.advance()
        if self.accept_kw("AS"):
            self.expect_kw("OF")
            return A.TxCond("AS_OF", (self.additive(),))
        if self.accept_kw("FROM"):
            a = self.additive()
            self.expect_kw("TO")
            return A.TxCond("FROM_TO", (a, self.additive()))
        if self.accept_kw("BETWEEN"):
            a = self.additive()
            self.expect_kw("AND")
            return A.TxCond("BETWEEN", (a, self.additive()))
        if self.accept_kw("ALL"):
            return A.TxCond("ALL")
        raise self.error("expected AS OF, FROM, BETWEEN or ALL")

    def path_pattern(self) -> A.PathPattern:
        terms = [self.vertex_term()]
        while True:
            edge = self.edge_term()
            if edge is None:
                break
            terms.append(edge)
            terms.append(self.vertex_term())
        return A.PathPattern(tuple(terms))

    def _var_and_labels(self, close: str):
        var = None
        if self.tok.kind == "IDENT":
            var = self.advance().value
        labels = []
        if self.accept_punct(":"):
            labels.append(self.name("label"))
            while self.accept_punct("|"):
                labels.append(self.name("label"))
        self.expect_punct(close)
        return var, tuple(labels)

    def vertex_term(self) -> A.VertexTerm:
        self.expect_punct("(")
        return A.VertexTerm(*self._var_and_labels(")"))

    def edge_term(self) -> A.EdgeTerm | None:
        t = self.tok
        if t.is_punct("->"):
            self.advance()
            return A.EdgeTerm(None, (), "OUT")
        if t.is_punct("-") and self.peek().is_punct("["):
            self.advance()
            self.advance()
            var, labels = self._var_and_labels("]")
            self.expect_punct("->")
            return A.EdgeTerm(var, labels, "OUT")
        if t.is_punct("<") and self.peek().is_punct("-"):
            self.advance()
            self.advance()
            if self.accept_punct("["):
                var, labels = self._var_and_labels("]")
                self.expect_punct("-")
                return A.EdgeTerm(var, labels, "IN")
            return A.EdgeTerm(None, (), "IN")
        return None

    # -- expressions -----------------------------------------------------------

    def expr(self) -> A.Expr:
        left = self.and_expr()
        while self.accept_kw("OR"):
            left = A.Binary("OR", left, self.and_expr())
        return left

    def and_expr(self) -> A.Expr:
        left = self.not_expr()
        while self.accept_kw("AND"):
            left = A.Binary("AND", left, self.not_expr())
        return left

    def not_expr(self) -> A.Expr:
        if self.accept_kw("NOT"):
            return A.Unary("NOT", self.not_expr())
        return self.comparison()

    def comparison(self) -> A.Expr:
        left = self.additive()
        t = self.tok
        if t.kind == "PUNCT" and t.value in _COMPARISON:
            self.advance()
            return A.Binary(t.value, left, self.additive())
        if t.is_kw("IS"):
            self.advance()
            neg = self.accept_kw("NOT")
            self.expect_kw("NULL")
            return A.IsNull(left, neg)
        immediately = False
        if t.is_kw("IMMEDIATELY"):
            self.advance()
            immediately = True
            if not self.tok.is_kw("PRECEDES", "SUCCEEDS"):
                raise self.error("expected PRECEDES or SUCCEEDS after IMMEDIATELY")
        t = self.tok
        if t.kind == "KW" and t.value in A.PREDICATES:
            self.advance()
            return A.TemporalPredicate(t.value, left, self.additive(), immediately)
        return left

    def additive(self) -> A.Expr:
        left = self.multiplicative()
        while self.tok.is_punct("+", "-"):
            op = self.advance().value
            left = A.Binary(op, left, self.multiplicative())
        return left

    def multiplicative(self) -> A.Expr:
        left = self.unary()
        while self.tok.is_punct("*", "/", "%"):
            op = self.advance().value
            left = A.Binary(op, left, self.unary())
        return left

    def unary(self) -> A.Expr:
        if self.tok.is_punct("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, A.Literal) and type(operand.value) in (int, float):
                return A.Literal(-operand.value)
            return A.Unary("-", operand)
        if self.tok.is_punct("+"):
            self.advance()
            return self.unary()
        return self.primary()

    def _temporal_literal(self, kind: str) -> A.TemporalLiteral:
        paren = self.accept_punct("(")  # TIMESTAMP('...') form
        if self.tok.kind != "STRING":
            raise self.error(f"expected string literal after {kind}")
        tok = self.advance()
        if paren:
            self.expect_punct(")")
        try:
            parse_timestamp(tok.value)
        except ChronosError as exc:
            raise ParseError(str(exc), tok.pos) from None
        return A.TemporalLiteral(kind, tok.value)

    def primary(self) -> A.Expr:
        t = self.tok
        if t.is_punct("("):
            self.advance()
            e = self.expr()
            self.expect_punct(")")
            return e
        if t.kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return A.Literal(t.value)
        if t.is_kw("TRUE", "FALSE"):
            self.advance()
            return A.Literal(t.value == "TRUE")
        if t.is_kw("NULL"):
            self.advance()
            return A.Literal(None)
        if t.is_kw("DATE", "TIMESTAMP"):
            self.advance()
            return self._temporal_literal(t.value)
        if t.is_kw("CURRENT_TIMESTAMP"):
            self.advance()
            if self.accept_punct("("):
                self.expect_punct(")")
            return A.CurrentTimestamp()
        if t.is_kw("PERIOD"):
            self.advance()
            self.expect_punct("(")
            a = self.expr()
            self.expect_punct(",")
            b = self.expr()
            self.expect_punct(")")
            return A.PeriodCtor(a, b)
        if t.is_kw("LENGTH"):
            self.advance()
            self.expect_punct("(")
            unit = None
            u = self.tok
            if u.kind == "IDENT" and u.value.upper() in _UNITS and self.peek().is_punct(","):
                unit = u.value.upper()
                self.advance()
                self.advance()
            arg = self.expr()
            self.expect_punct(")")
            return A.Length(unit, arg)
        if t.kind == "IDENT":
            if self.peek().is_punct("("):
                return self.call()
            return self.reference()
        raise self.error("expected expression")

    def call(self) -> A.Expr:
        tok = self.advance()
        fname = tok.value.upper()
        self.expect_punct("(")
        if fname in A.AGGREGATES:
            distinct = self.accept_kw("DISTINCT")
            if fname == "COUNT" and self.accept_punct("*"):
                self.expect_punct(")")
                return A.Aggregate("COUNT", None, False)
            arg = self.expr()
            self.expect_punct(")")
            return A.Aggregate(fname, arg, distinct)
        if fname in A.FUNCTIONS:
            args = [self.expr()]
            while self.accept_punct(","):
                args.append(self.expr())
            self.expect_punct(")")
            return A.FuncCall(fname, tuple(args))
        raise ParseError(f"unknown function {tok.value!r}", tok.pos)

    def reference(self) -> A.Expr:
        var_tok = self.advance()
        var = var_tok.value
        if not self.accept_punct("."):
            return A.VarRef(var)
        first = self.name("property or time identifier")
        if _time_ident(first):
            if self.tok.is_punct("."):
                raise ValidationError(f"time identifier {first} cannot be followed by '.' "
                                      f"(position {self.tok.pos})")
            return A.TimeRef(var, None, _time_ident(first), first)
        if not self.accept_punct("."):
            return A.PropRef(var, first)
        ident_tok = self.tok
        ident = self.name("time identifier")
        canon = _time_ident(ident)
        if canon is None:
            raise ValidationError(f"unknown time identifier {ident!r} at position {ident_tok.pos}")
        return A.TimeRef(var, first, canon, ident)


def _time_ident(word: str) -> str | None:
    up = word.upper()
    up = A.TIME_ALIASES.get(up, up)
    return up if up in A.TIME_IDS else None


# -- validation ------------------------------------------------------------------


def _static_type(e: A.Expr) -> str:
    """'period', 'instant', 'scalar' or 'unknown'."""
    if isinstance(e, A.TimeRef):
        return "period" if e.is_period else "instant"
    if isinstance(e, A.PeriodCtor):
        return "period"
    if isinstance(e, A.VarRef):
        return "element"
    if isinstance(e, A.FuncCall):
        return "scalar"
    if isinstance(e, (A.TemporalLiteral, A.CurrentTimestamp)):
        return "instant"
    if isinstance(e, A.Literal):
        return "unknown" if e.value is None else "scalar"
    if isinstance(e, (A.Length, A.TemporalPredicate, A.IsNull)):
        return "scalar"
    if isinstance(e, A.Binary) and e.op in ("=", "<>", "<", "<=", ">", ">=", "AND", "OR"):
        return "scalar"
    if isinstance(e, A.Aggregate) and e.func in ("FIRST", "LAST") and e.arg is not None:
        return "instant" if _static_type(e.arg) in ("instant", "unknown") else "scalar"
    if isinstance(e, A.Aggregate) and e.func in ("COUNT", "SUM", "AVG"):
        return "scalar"
    return "unknown"


def _check_expr(e: A.Expr, bound: dict[str, str], where: str, allow_agg: bool, aliases=()) -> None:
    for x in A.walk(e):
        if isinstance(x, A.VarRef):
            if x.name not in bound and x.name not in aliases:
                raise ValidationError(f"unbound variable {x.name!r} in {where}")
        elif isinstance(x, (A.PropRef, A.TimeRef)):
            if x.var not in bound:
                raise ValidationError(f"unbound variable {x.var!r} in {where}")
        elif isinstance(x, A.TemporalPredicate):
            lt, rt = _static_type(x.left), _static_type(x.right)
            if lt not in ("period", "unknown") or (isinstance(x.left, A.PropRef)):
                raise ValidationError(f"left operand of {x.op} must be a period")
            if x.op == "CONTAINS":
                if rt in ("scalar", "element"):
                    raise ValidationError("right operand of CONTAINS must be a period or timestamp")
            elif rt not in ("period", "unknown") or isinstance(x.right, A.PropRef):
                raise ValidationError(f"right operand of {x.op} must be a period")
        elif isinstance(x, A.Length):
            if _static_type(x.arg) not in ("period", "unknown") or isinstance(x.arg, A.PropRef):
                raise ValidationError("LENGTH expects a period argument")
        elif isinstance(x, A.PeriodCtor):
            for b in (x.start, x.end):
                if _static_type(b) in ("period", "scalar", "element"):
                    raise ValidationError("PERIOD bounds must be timestamps")
        elif isinstance(x, A.Aggregate):
            if not allow_agg:
                raise ValidationError(f"aggregate {x.func} not allowed in {where}")
            if x.arg is not None and A.contains_aggregate(x.arg):
                raise ValidationError("nested aggregates are not allowed")
            if x.func in ("FIRST", "LAST") and x.arg is not None and _static_type(x.arg) in ("period", "scalar"):
                raise ValidationError(f"{x.func} expects date or timestamp values")
        elif isinstance(x, A.FuncCall):
            if len(x.args) != 1 or not isinstance(x.args[0], A.VarRef):
                raise ValidationError(f"{x.name} expects a single variable argument")


def _covered(e: A.Expr, groups: tuple, aliases: dict) -> bool:
    if e in groups or isinstance(e, A.Aggregate):
        return True
    if isinstance(e, A.VarRef) and e.name in aliases:
        return True
    if isinstance(e, (A.Literal, A.TemporalLiteral, A.CurrentTimestamp)):
        return True
    kids = A.children(e)
    if not kids:
        return False
    return all(_covered(k, groups, aliases) for k in kids)


def validate(q: A.Query) -> A.Query:
    bound: dict[str, str] = {}
    graphs = {m.graph for m in q.matches if m.graph}
    if len(graphs) > 1:
        raise ValidationError(f"a query may address one graph, got {sorted(graphs)}")
    for m in q.matches:
        for p in m.patterns:
            for term in p.terms:
                if term.var is None:
                    continue
                kind = "vertex" if isinstance(term, A.VertexTerm) else "edge"
                prev = bound.setdefault(term.var, kind)
                if prev != kind:
                    raise ValidationError(f"variable {term.var!r} used as both vertex and edge")
        for arg in m.tx.args:
            if A.variables(arg):
                raise ValidationError("FOR TX_TIME bounds must be constant expressions")
            if _static_type(arg) in ("period", "scalar"):
                raise ValidationError("FOR TX_TIME bounds must be timestamps")
            _check_expr(arg, bound, "FOR TX_TIME", False)
    aliases: dict[str, A.Expr] = {}
    if q.items is not None:
        for it in q.items:
            _check_expr(it.expr, bound, "SELECT", True)
            if it.alias is not None:
                if it.alias in aliases:
                    raise ValidationError(f"duplicate alias {it.alias!r}")
                aliases[it.alias] = it.expr
    if q.where is not None:
        _check_expr(q.where, bound, "WHERE", False)
    for g in q.group_by:
        _check_expr(g, bound, "GROUP BY", False, aliases)
    aggregated = bool(q.group_by) or (q.items is not None and any(A.contains_aggregate(i.expr) for i in q.items))
    if q.having is not None:
        if not aggregated:
            raise ValidationError("HAVING requires GROUP BY or aggregates")
        _check_expr(q.having, bound, "HAVING", True, aliases)
    for o in q.order_by:
        _check_expr(o.expr, bound, "ORDER BY", aggregated, aliases)
    if aggregated:
        if q.items is None:
            raise ValidationError("SELECT * cannot be combined with aggregation")
        groups = tuple(aliases.get(g.name, g) if isinstance(g, A.VarRef) and g.name in aliases
                       and g.name not in bound else g for g in q.group_by)
        for it in q.items:
            if not _covered(it.expr, groups, {}):
                raise ValidationError("non-aggregated SELECT expressions must appear in GROUP BY")
        for extra in ([q.having] if q.having is not None else []) + [o.expr for o in q.order_by]:
            if not _covered(extra, groups, aliases):
                raise ValidationError("expression must be aggregated or appear in GROUP BY")
    return q


def parse(text: str) -> A.Query:
    """Parse and validate ``text``; raises ParseError or ValidationError."""
    p = _Parser(text)
    return validate(p.parse(text))


def parse_expression(text: str) -> A.Expr:
    p = _Parser(text)
    from .lexer import normalize
    p._text = normalize(text)
    e = p.expr()
    if p.tok.kind != "EOF":
        raise p.error("unexpected trailing input")
    return e
