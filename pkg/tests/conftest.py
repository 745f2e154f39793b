import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def listing_examples():
    """Transcribed input/target pairs: 80 listings plus three worked examples."""
    return json.loads((DATA / "listing_examples.json").read_text())


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Collects one verdict line per acceptance criterion, printed at the end of the run."""

    def report(number, name, passed, detail):
        verdict = "PASS" if passed else "FAIL"
        _ACCEPTANCE.append((number, f"[{verdict}] {number:>2}. {name}: {detail}"))

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
