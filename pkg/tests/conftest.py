import os
from pathlib import Path

import pytest

from curtail.design import DesignParams

ROOT = Path(__file__).resolve().parent.parent

# searches reuse feasible fronts stored here; delete the directory to recompute
CACHE_DIR = Path(os.environ.get("CURTAIL_CACHE_DIR", ROOT / ".cache" / "search"))


@pytest.fixture
def scenario1():
    return DesignParams(0.05, 0.15, 0.1, 0.3)


@pytest.fixture
def table3():
    return DesignParams(0.05, 0.10, 0.2, 0.4)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[n]:
            terminalreporter.write_line(line)
