from collections import Counter

import pytest

from bitegra.chronos import Period, format_timestamp
from bitegra.database import Database
from bitegra.errors import QueryTypeError
from bitegra.executor import Evaluator, Row
from bitegra.tpgql import parse_expression

from conftest import StepClock

LEIPZIG = "SELECT u.name, u.studentCount{extra} FROM MATCH (u:University) WHERE u.city = 'Leipzig'{where}"


def ev(text, instant=0):
    return Evaluator(instant)(parse_expression(text), Row())


def rows(db, q, **kw):
    return db.query(q, **kw).rows


def ts(t):
    return f"TIMESTAMP '{format_timestamp(t, 'full')}'"


# -- property evolution on the fixture -------------------------------------------

def test_all_property_versions_are_returned(student):
    r = student.query(LEIPZIG.format(extra="", where=""))
    assert r.columns == ("name", "studentCount")
    assert sorted(r.column("studentCount")) == [28004, 28797, 29061]


def test_validity_column(student):
    r = student.query(LEIPZIG.format(extra=", u.studentCount.VALID_TIME AS validity", where=""))
    assert sorted(str(p) for p in r.column("validity")) == [
        "[2016-04-01 00:00, 2017-04-01 00:00)", "[2017-04-01 00:00, 2018-04-01 00:00)",
        "[2018-04-01 00:00, 2019-04-01 00:00)"]


def test_contains_filter(student):
    q = LEIPZIG.format(extra="", where=" AND u.studentCount.VALID_TIME CONTAINS TIMESTAMP '2018-01-01 00:00'")
    assert rows(student, q) == [("Leipzig University", 28797)]


def test_contains_equals_explicit_bounds(student):
    a = student.query("SELECT n.name FROM MATCH (n:Person)-[s:studiedAt]->(u:University) "
                      "WHERE u.city = 'Leipzig' AND s.VALID_TIME CONTAINS DATE '2019-02-15'")
    b = student.query("SELECT n.name FROM MATCH (n:Person)-[s:studiedAt]->(u:University) "
                      "WHERE u.city = 'Leipzig' AND s.VAL_FROM <= DATE '2019-02-15' AND s.VAL_TO > DATE '2019-02-15'")
    assert len(a) > 0 and a.same_multiset(b)


def test_length_filter(student):
    r = student.query("SELECT n.name FROM MATCH (n:Person) WHERE LENGTH(DAY, n.name.VAL_TIME) > 1")
    assert "Max Mustermann" not in r.column("name") and len(r) == 8


def test_chronological_chain(student):
    r = student.query("SELECT ID(p1), ID(p2), ID(p3) FROM MATCH (p1:Person)-[l1:likes]->(p2:Person)"
                      "-[l2:likes]->(p3:Person) WHERE l1.VAL_TIME PRECEDES l2.VAL_TIME")
    assert sorted(r.rows) == [(10, 11, 12), (12, 10, 11)]


def test_first_last(student):
    (row,) = rows(student, "SELECT FIRST(s.VAL_FROM), FIRST(s.startTT) FROM MATCH (n)-[s:studiedAt]->(u)")
    assert str(row[0]) == "1409-04-01 00:00:00" and str(row[1]) == "2006-05-12 14:45:22"


def test_first_last_by_city(student):
    r = student.query("SELECT u.city, FIRST(s.VAL_FROM), LAST(s.VAL_FROM) "
                      "FROM MATCH (n:Person)-[s:studiedAt]->(u:University) GROUP BY u.city")
    assert {tuple(map(str, x)) for x in r.rows} == {
        ("Leipzig", "1409-04-01 00:00:00", "2020-04-01 00:00:00"),
        ("Berlin", "1810-04-01 00:00:00", "2020-04-01 00:00:00"),
        ("Munich", "1472-04-01 00:00:00", "2020-04-01 00:00:00")}


def test_aggregate_over_empty_input(student):
    assert rows(student, "SELECT FIRST(s.VAL_FROM) FROM MATCH (n)-[s:studiedAt]->(u:Nope)") == []


def test_standard_aggregates(student):
    (row,) = rows(student, "SELECT AVG(u.studentCount), SUM(u.studentCount), MIN(u.studentCount), "
                           "MAX(u.studentCount), COUNT(DISTINCT u.name), COUNT(*) FROM MATCH (u:University)")
    assert row == (pytest.approx(85862 / 3), 85862, 28004, 29061, 3, 5)


def test_column_naming(student):
    r = student.query("SELECT n.name, n.name, COUNT(*) AS c, n.name FROM MATCH (n:Person) GROUP BY n.name")
    assert r.columns == ("name", "name_2", "c", "name_3")
    assert student.prepare("SELECT LENGTH(DAY, n.name.VAL_TIME) FROM MATCH (n)").columns == \
        ("LENGTH(DAY, n.name.VAL_TIME)",)


def test_length_of_unbounded_period_propagates(student):
    from bitegra.chronos import InfiniteBoundError
    with pytest.raises(InfiniteBoundError):
        student.query("SELECT LENGTH(DAY, u.name.VAL_TIME) FROM MATCH (u:University)")


def test_order_and_limit(student):
    r = student.query("SELECT e.startTT FROM MATCH ()-[e:studiedAt]->() ORDER BY e.startTT DESC LIMIT 3")
    values = r.column("startTT")
    assert len(values) == 3 and values == sorted(values, reverse=True)
    r = student.query("SELECT n.name, u.name FROM MATCH (n:Person)-[:studiedAt]->(u) ORDER BY u.name, n.name DESC")
    keys = [(b, a) for a, b in r.rows]
    assert keys == sorted(keys, key=lambda k: (k[0], [-ord(c) for c in k[1]]))


def test_distinct(student):
    r = student.query("SELECT DISTINCT u.city FROM MATCH (n)-[:studiedAt]->(u:University)")
    assert sorted(r.column("city")) == ["Berlin", "Leipzig", "Munich"]


def test_absent_property_binds_null(student):
    r = student.query("SELECT n.nope, n.nope IS NULL FROM MATCH (n:Person)")
    assert set(r.rows) == {(None, True)} and len(r) == 9
    assert rows(student, "SELECT n.name FROM MATCH (n:Person) WHERE n.nope = 1") == []
    assert len(rows(student, "SELECT n.name FROM MATCH (n:Person) WHERE n.nope = 1 OR TRUE")) == 9


def test_default_equals_current_timestamp(student):
    t = student.now()
    a = student.query("SELECT n.name, n.TX_TIME FROM MATCH (n:Person)", eval_instant=t)
    b = student.query("SELECT n.name, n.TX_TIME FROM MATCH (n:Person) FOR TX_TIME AS OF CURRENT_TIMESTAMP",
                      eval_instant=t)
    assert len(a) == 9 and a.same_multiset(b)


def test_multi_clause_windows(student):
    # Posts exist at the load time; the first clause pins them there
    r = student.query("SELECT ID(m), ID(p) FROM MATCH (p:Post) FOR TX_TIME AS OF DATE '2020-01-01', "
                      "MATCH (m:Person)-[:likes]->(p)")
    assert sorted(r.rows) == [(10, 30), (16, 31)]
    assert rows(student, "SELECT ID(p) FROM MATCH (p:Post) FOR TX_TIME AS OF DATE '2019-01-01'") == []


@pytest.mark.parametrize("q", ["SELECT n.name + 1 FROM MATCH (n:Person)",
                               "SELECT FIRST(n.name) FROM MATCH (n:Person)",
                               "SELECT n.name FROM MATCH (n:Person) WHERE n.name > 3"])
def test_runtime_type_errors(student, q):
    with pytest.raises(QueryTypeError):
        student.query(q)


# -- scalar evaluation -------------------------------------------------------


@pytest.mark.parametrize("text,value", [
    ("NULL AND FALSE", False), ("NULL OR TRUE", True), ("NOT NULL", None), ("NULL AND TRUE", None),
    ("NULL OR FALSE", None), ("NULL = NULL", None), ("1 = 1.0", True), ("7 / 2", 3), ("7.0 / 2", 3.5),
    ("7 % 3", 1), ("-3 + 1", -2), ("'a' < 'b'", True),
    ("LENGTH(DAY, PERIOD(DATE '2019-01-01', DATE '2019-01-03'))", 2),
    ("PERIOD(DATE '2019-01-01', DATE '2019-01-03') CONTAINS DATE '2019-01-02'", True),
    ("DATE '2019-01-01' < TIMESTAMP '2019-01-01 00:00:01'", True),
])
def test_scalar(text, value):
    out = ev(text)
    assert out == value and type(out) is type(value)


def test_current_timestamp_is_eval_instant():
    assert int(ev("CURRENT_TIMESTAMP", 12345)) == 12345


def test_precedes_boundary():
    a, b = "PERIOD(TIMESTAMP '1970-01-01 00:00:00', TIMESTAMP '1970-01-01 00:00:05')", \
        "PERIOD(TIMESTAMP '1970-01-01 00:00:05', TIMESTAMP '1970-01-01 00:00:09')"
    assert ev(f"{a} PRECEDES {b}") and ev(f"{a} IMMEDIATELY PRECEDES {b}") and not ev(f"{b} PRECEDES {a}")


# -- transaction-time windows on a hand-built history ----------------------------


@pytest.fixture
def history():
    """a: [10s, 20s); b: [20s, inf); x, y with an edge alive in [10s, 15s) only.

    x changes its validity at 30s, after the edge is gone.
    """
    db = Database(clock=StepClock(10**6))
    g = db.create_graph("h")
    s = 1000
    tx = g.begin()
    a = tx.add_vertex("A", {"k": 1})
    x = tx.add_vertex("X", valid=Period(0, 100 * s))
    y = tx.add_vertex("X")
    e = tx.add_edge("r", x, y, valid=Period(0, 50 * s))
    tx.commit(commit_time=10 * s)
    tx = g.begin()
    tx.delete_element(e)
    tx.commit(commit_time=15 * s)
    tx = g.begin()
    tx.delete_element(a)
    b = tx.add_vertex("A", {"k": 2})
    tx.commit(commit_time=20 * s)
    tx = g.begin()
    tx.set_valid_time(x, Period(0, 200 * s))
    tx.commit(commit_time=30 * s)
    return db, dict(a=a, b=b, x=x, y=y), s


def test_tx_windows(history):
    db, ids, s = history
    q = "SELECT ID(n) FROM MATCH (n:A) FOR TX_TIME {}"
    got = {m: sorted(r[0] for r in rows(db, q.format(c))) for m, c in [
        ("as_of_19", f"AS OF {ts(19 * s)}"), ("as_of_20", f"AS OF {ts(20 * s)}"),
        ("between", f"BETWEEN {ts(10 * s)} AND {ts(20 * s)}"), ("from_to", f"FROM {ts(10 * s)} TO {ts(20 * s)}"),
        ("all", "ALL")]}
    a, b = ids["a"], ids["b"]
    assert got == {"as_of_19": [a], "as_of_20": [b], "between": [a, b], "from_to": [a], "all": [a, b]}


def test_between_contains_from_to(history):
    db, _, s = history
    for lo in range(9, 32, 3):
        for hi in range(lo, 33, 4):
            bt = Counter(rows(db, f"SELECT ID(n), n.k FROM MATCH (n) FOR TX_TIME BETWEEN {ts(lo * s)} AND {ts(hi * s)}"))
            ft = Counter(rows(db, f"SELECT ID(n), n.k FROM MATCH (n) FOR TX_TIME FROM {ts(lo * s)} TO {ts(hi * s)}"))
            assert not (ft - bt)


def test_deleted_edge_visible_in_history(history):
    db, ids, s = history
    assert rows(db, "SELECT ID(e) FROM MATCH (a)-[e]->(b)") == []
    assert len(rows(db, f"SELECT ID(e) FROM MATCH (a)-[e]->(b) FOR TX_TIME AS OF {ts(12 * s)}")) == 1


def test_range_match_requires_co_visibility(history):
    db, ids, s = history
    # x has two versions under ALL but only the first coexisted with the edge
    r = db.query("SELECT ID(a), a.VAL_TIME FROM MATCH (a)-[e]->(b) FOR TX_TIME ALL")
    assert len(r) == 1 and r.rows[0][1] == Period(0, 100 * s)
    assert len(rows(db, "SELECT ID(a), a.VAL_TIME FROM MATCH (a:X) FOR TX_TIME ALL")) == 3


def test_self_loop_homomorphism():
    db = Database(clock=StepClock(10**6))
    g = db.create_graph("loop")
    tx = g.begin()
    v = tx.add_vertex("N")
    w = tx.add_vertex("N")
    tx.add_edge("r", v, v)
    tx.add_edge("r", v, w)
    tx.commit()
    assert sorted(rows(db, "SELECT ID(a), ID(b) FROM MATCH (a)-[]->(b)")) == [(v, v), (v, w)]
    # two edge variables may bind the same edge
    assert len(rows(db, "SELECT ID(e1) FROM MATCH (a)-[e1]->(b), MATCH (c)-[e2]->(d) WHERE ID(e1) = ID(e2)")) == 2
