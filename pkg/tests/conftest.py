from pathlib import Path

import pytest

from dualsum.wordnet import load_wndb, parse_fixture_lexicon

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def fixture_lexicon():
    return parse_fixture_lexicon((DATA / "lexicon.tsv").read_text())


@pytest.fixture(scope="session")
def wndb_lexicon():
    return load_wndb(DATA)


# One PASS/FAIL line per acceptance criterion, collected by tests/test_acceptance.py.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
