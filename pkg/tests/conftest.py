"""Shared fixtures: acceptance-verdict recording and end-of-run summary."""

import pytest

_criterion_lines = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion, then assert it.

    The lines are replayed in a terminal summary section so every run shows
    one line per criterion even though passing tests have their stdout
    swallowed by capture.
    """
    def record(num: int, ok: bool, detail: str) -> None:
        line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}"
        _criterion_lines.append(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
