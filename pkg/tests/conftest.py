"""Shared fixtures. The criterion fixture times an acceptance check and
replays its PASS/FAIL line in the terminal summary, where pytest's output
capture cannot eat it.
"""

import time
from contextlib import contextmanager

import pytest

_criterion_lines: list[str] = []


@pytest.fixture
def criterion():
    @contextmanager
    def _criterion(name: str, budget_s: float):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            _criterion_lines.append(f"FAIL  {name}")
            raise
        elapsed = time.perf_counter() - t0
        line = f"{name} ({elapsed:.2f}s, budget {budget_s:g}s)"
        if elapsed >= budget_s:
            _criterion_lines.append(f"FAIL  {line}")
            raise AssertionError(f"over budget: {line}")
        _criterion_lines.append(f"PASS  {line}")

    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.line(line)
