from __future__ import annotations

import pytest

_REPORT: dict[str, list[str]] = {}


@pytest.fixture(scope="session")
def report():
    """Lines recorded here are printed after the run, grouped by section."""

    def add(section: str, line: str) -> None:
        _REPORT.setdefault(section, []).append(line)

    return add


def pytest_terminal_summary(terminalreporter):
    for section, lines in _REPORT.items():
        terminalreporter.write_sep("-", section)
        for line in lines:
            terminalreporter.write_line(line)
