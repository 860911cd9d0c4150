from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from tsens.io import load_database, load_manifest
from tsens.query import parse_query
from tsens.relation import Database

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"

# PASS/FAIL lines appended by the acceptance tests
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def path4():
    db = load_database(load_manifest(FIXTURES / "path4" / "manifest.json"))
    q = parse_query((FIXTURES / "path4" / "query.cq").read_text())
    return db, q


def make_db(**relations) -> Database:
    """``make_db(R1=(("A", "B"), [("a1", "b1"), (("a2", "b1"), 3)]))``"""
    return Database.from_rows(relations)
