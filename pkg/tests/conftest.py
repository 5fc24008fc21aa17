"""Shared pytest plumbing for the suite.

The acceptance tests record one verdict line each; the terminal summary
hook prints them after the run so every criterion shows a visible PASS
or FAIL regardless of output capturing.
"""

import pytest

_verdicts: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Callable the acceptance tests use to record their verdict line."""
    return _verdicts.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
