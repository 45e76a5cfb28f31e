from __future__ import annotations

import pytest

from par1.model import PARModel

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def two_three():
    """The P=2, a=(2, 3) model used in most hand computations."""
    return PARModel(2, (2.0, 3.0))


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict, shown in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
