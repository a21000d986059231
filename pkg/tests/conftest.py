import os

import pytest

from nl2grid.table import parse_csv
from nl2grid.tcr import Schema

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
CORPUS = os.path.join(os.path.dirname(__file__), "..", "corpus")


def fixture_text(name: str) -> str:
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as f:
        return f.read()


@pytest.fixture(scope="session")
def superbowl():
    return parse_csv(fixture_text("superbowl.csv"))


@pytest.fixture(scope="session")
def astronauts():
    return parse_csv(fixture_text("astronauts.csv"))


@pytest.fixture(scope="session")
def houses():
    return parse_csv(fixture_text("houses.csv"))


@pytest.fixture(scope="session")
def superbowl_schema(superbowl):
    return Schema.of_table(superbowl)


@pytest.fixture(scope="session")
def astronauts_schema(astronauts):
    return Schema.of_table(astronauts)


@pytest.fixture(scope="session")
def houses_schema(houses):
    return Schema.of_table(houses)


@pytest.fixture(scope="session")
def corpus_dir():
    return os.path.abspath(CORPUS)
