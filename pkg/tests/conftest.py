from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from bitegra.chronos import parse_timestamp
from bitegra.database import Database
from bitegra.interchange import import_graph
from bitegra.storage import SchemaConfig

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "bitegra" / "fixtures"
ELEMENT_SCHEMES = ("GVE", "TFL", "HyVE")
PROPERTY_SCHEMES = ("PAC", "PAT", "HyPe")
CONFIGS = [(e, p) for e in ELEMENT_SCHEMES for p in PROPERTY_SCHEMES]
# every student_network record is loaded with this transaction time so that
# historical FOR TX_TIME queries of the examples see data
LOAD_TIME = parse_timestamp("2019-06-01 00:00:00")


def preset(elements: str, properties: str) -> SchemaConfig:
    # make the hybrid variants non-trivial: some labels get their own table,
    # some keys become columns
    return SchemaConfig.preset(elements, properties,
                               per_label=("University", "studiedAt", "Sensor"),
                               column_keys=("Person.firstName", "Asset.name", "University.city"))


class StepClock:
    """Deterministic clock: every call advances by ``step`` milliseconds."""

    def __init__(self, start: int, step: int = 1000):
        self._it = itertools.count(start, step)

    def __call__(self) -> int:
        return next(self._it)


def student_db(config: SchemaConfig | None = None, clock=None) -> Database:
    db = Database(clock=clock or StepClock(parse_timestamp("2021-01-01")))
    g = db.create_graph("student_network", config)
    import_graph(g, FIXTURES / "student_network.jsonl", tx_time=LOAD_TIME)
    return db


def sensor_db(config: SchemaConfig | None = None, clock=None) -> Database:
    db = Database(clock=clock or StepClock(parse_timestamp("2021-03-01 12:00")))
    g = db.create_graph("sensors", config)
    import_graph(g, FIXTURES / "sensor_assets.jsonl")
    return db


@pytest.fixture
def student():
    return student_db()


@pytest.fixture
def sensors():
    return sensor_db()


@pytest.fixture(params=CONFIGS, ids=lambda c: f"{c[0]}+{c[1]}")
def config(request):
    return preset(*request.param)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
