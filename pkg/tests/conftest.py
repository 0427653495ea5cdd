import warnings

import pytest

from infoloss.quant import UndersamplingWarning


@pytest.fixture
def quiet():
    """Silence the undersampling warning for runs that deliberately trip it."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UndersamplingWarning)
        yield


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; the lines are
    repeated in the terminal summary so they survive output capture."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
