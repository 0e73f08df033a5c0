"""Collects the one-line acceptance verdicts and prints them after the run."""

import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record ``criterion N title: PASS|FAIL (detail)`` and return the pass flag."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {title}: {'PASS' if passed else 'FAIL'} ({detail})"
        _VERDICTS[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
