import pytest
from hypothesis import given, settings, strategies as st

from bitegra.errors import LexError, ParseError, ValidationError
from bitegra.tpgql import ast as A
from bitegra.tpgql import parse, parse_expression, to_text, tokenize
from bitegra.tpgql.printer import expr_to_text

from conftest import FIXTURES

LISTINGS = [q.strip() for q in (FIXTURES / "example_queries.tpgql").read_text().split(";\n\n") if q.strip()]


def kinds(text):
    return [(t.kind, t.value) for t in tokenize(text)][:-1]


def test_tokenize_select():
    assert kinds("SELECT n.name") == [("KW", "SELECT"), ("IDENT", "n"), ("PUNCT", "."), ("IDENT", "name")]


def test_tokenize_date_literal():
    assert kinds("DATE '2019-02-15'") == [("KW", "DATE"), ("STRING", "2019-02-15")]


def test_keywords_are_case_insensitive():
    assert kinds("select Distinct") == [("KW", "SELECT"), ("KW", "DISTINCT")]


def test_unterminated_string():
    with pytest.raises(LexError):
        tokenize("WHERE n.name = 'abc")


def test_typographic_quotes():
    assert kinds("DATE ‘2019-02-15’") == kinds("DATE '2019-02-15'")


def test_bitemporal_query_structure():
    q = parse("SELECT n.name FROM MATCH (n:Person)-[s:studiedAt]->(u:University) "
              "FOR TX_TIME AS OF TIMESTAMP '2020-02-01 13:00' "
              "WHERE s.VALID_TIME CONTAINS DATE '2019-02-15'")
    m = q.matches[0]
    assert m.tx.mode == "AS_OF"
    assert [t.var for t in m.patterns[0].terms] == ["n", "s", "u"]
    assert isinstance(q.where, A.TemporalPredicate) and q.where.op == "CONTAINS"
    assert q.where.left == A.TimeRef("s", None, "VAL_TIME")


def test_default_tx_condition():
    assert parse("SELECT n.name FROM MATCH (n:Person)").matches[0].tx == A.DEFAULT_TX


@pytest.mark.parametrize("text,mode", [
    ("FOR TX_TIME ALL", "ALL"),
    ("FOR TX_TIME FROM TIMESTAMP '2019-01-01' TO TIMESTAMP '2020-01-01'", "FROM_TO"),
    ("FOR TX_TIME BETWEEN TIMESTAMP '2019-01-01' AND TIMESTAMP '2020-01-01'", "BETWEEN"),
    ("FOR TX_TIME AS OF CURRENT_TIMESTAMP", "AS_OF"),
])
def test_tx_modes(text, mode):
    assert parse(f"SELECT n.name FROM MATCH (n) {text}").matches[0].tx.mode == mode


def test_unbound_variable():
    with pytest.raises(ValidationError):
        parse("SELECT x.name FROM MATCH (n:Person)")


@pytest.mark.parametrize("bad", [
    "SELECT n.name FROM MATCH (n:Person) WHERE n.name CONTAINS DATE '2019-01-01'",
    "SELECT n.name FROM MATCH (n:Person) WHERE COUNT(*) > 1",
    "SELECT n.name, COUNT(*) FROM MATCH (n:Person)",
    "SELECT n.name FROM MATCH (n)-[n]->(m)",
    "SELECT LENGTH(DAY, n.name) FROM MATCH (n)",
    "SELECT FIRST(n.VAL_TIME) FROM MATCH (n)",
    "SELECT a.x AS k, b.y AS k FROM MATCH (a)-[b]->(c)",
])
def test_validation_errors(bad):
    with pytest.raises(ValidationError):
        parse(bad)


@pytest.mark.parametrize("bad", ["SELECT FROM MATCH (n)", "SELECT n.name FROM (n)",
                                 "SELECT n.name FROM MATCH (n) LIMIT x", "SELECT n.name FROM MATCH (n) extra"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse(bad)


def test_immediately_is_distinct():
    a = parse_expression("a.VAL_TIME PRECEDES b.VAL_TIME")
    b = parse_expression("a.VAL_TIME IMMEDIATELY PRECEDES b.VAL_TIME")
    assert a != b and b.immediately and not a.immediately


def test_valid_time_alias():
    assert parse_expression("s.VALID_TIME") == parse_expression("s.VAL_TIME")
    # the original spelling is kept for printing
    assert expr_to_text(parse_expression("s.VALID_TIME")) == "s.VALID_TIME"


def test_property_time_ref():
    assert parse_expression("n.name.TX_FROM") == A.TimeRef("n", "name", "TX_FROM")


def test_listing_count():
    assert len(LISTINGS) == 23


@pytest.mark.parametrize("i", range(len(LISTINGS)))
def test_listing_round_trip(i):
    q = parse(LISTINGS[i])
    assert parse(to_text(q)) == q


# -- property: printing then parsing an expression is the identity --------------

names = st.sampled_from(["a", "b", "n"])
keys = st.sampled_from(["name", "age", "city"])
periods = st.one_of(
    st.builds(A.TimeRef, names, st.none(), st.sampled_from(["VAL_TIME", "TX_TIME"])),
    st.builds(A.TimeRef, names, keys, st.sampled_from(["VAL_TIME", "TX_TIME"])),
    st.builds(A.PeriodCtor, st.just(A.TemporalLiteral("DATE", "2018-01-01")),
              st.just(A.TemporalLiteral("TIMESTAMP", "2019-01-01 10:00"))),
)
atoms = st.one_of(
    st.builds(A.Literal, st.integers(0, 10**6)),
    st.builds(A.Literal, st.sampled_from([0.5, 2.25, 10.0])),
    st.builds(A.Literal, st.text(alphabet="ab' c", max_size=5)),
    st.builds(A.Literal, st.booleans()),
    st.builds(A.PropRef, names, keys),
    st.builds(A.TimeRef, names, st.none(), st.sampled_from(["VAL_FROM", "TX_TO"])),
    st.builds(A.Length, st.sampled_from([None, "DAY", "MONTH"]), periods),
    st.builds(A.TemporalPredicate, st.sampled_from(["OVERLAPS", "EQUALS", "CONTAINS"]), periods, periods),
    st.builds(A.TemporalPredicate, st.sampled_from(["PRECEDES", "SUCCEEDS"]), periods, periods, st.booleans()),
)


def _extend(children):
    return st.one_of(
        st.builds(A.Binary, st.sampled_from(["=", "<>", "<", ">=", "+", "-", "*", "/", "%", "AND", "OR"]),
                  children, children),
        st.builds(A.Unary, st.just("NOT"), children),
        st.builds(A.IsNull, children, st.booleans()),
    )


exprs = st.recursive(atoms, _extend, max_leaves=12)


@settings(max_examples=300)
@given(exprs)
def test_expression_round_trip(e):
    text = expr_to_text(e)
    assert parse_expression(text) == e, text
