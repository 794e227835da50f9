import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spmatch.mechanisms import parse_mechanism  # noqa: E402
from spmatch.solver import external_available  # noqa: E402

ACCEPTANCE_LINES: list[str] = []

requires_highs = pytest.mark.skipif(not external_available(), reason="highspy not installed")


@pytest.fixture(scope="session")
def zoo3():
    """Mechanisms at 3x3 with their full tables built once per session."""
    cache = {}

    def get(desc):
        if desc not in cache:
            mech = parse_mechanism(desc)
            mech.table(3, 3)
            cache[desc] = mech
        return cache[desc]

    return get


@pytest.fixture(scope="session")
def acceptance_log():
    def record(criterion: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
