"""Shared pytest hooks.

The acceptance tests register one human-readable verdict line each; echo
them after the run so they are visible without -s (capture hides prints
from passing tests).
"""

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
