"""Shared test hooks: surface acceptance verdict lines in the summary.

The acceptance tests print one PASS/FAIL line per criterion; pytest captures
per-test stdout, so those lines are re-emitted in the terminal summary where
plain `pytest -v` runs (and CI transcripts) show them.
"""

from _verdicts import ACCEPTANCE_VERDICTS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_VERDICTS:
        terminalreporter.write_line(line)
