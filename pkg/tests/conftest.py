"""Shared pytest hooks.

The acceptance module registers one summary line per numbered criterion; the
terminal-summary hook replays them in a dedicated section so the verdict is
visible even when every test passed and stdout was captured.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for name in ("test_acceptance", "tests.test_acceptance"):
        mod = sys.modules.get(name)
        if mod is not None:
            break
    lines = getattr(mod, "RESULTS", None) if mod is not None else None
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
