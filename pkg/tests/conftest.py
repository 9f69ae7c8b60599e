"""Shared pytest hooks for the test suite."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance report lines after the run.

    The acceptance tests print one PASS/FAIL line per criterion; pytest's
    default capture hides stdout for passing tests, so the lines are also
    collected and replayed here where they are always visible.
    """
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT_LINES", None) if module else None
    if lines:
        terminalreporter.section("acceptance report")
        for line in lines:
            terminalreporter.write_line(line)
