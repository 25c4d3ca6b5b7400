"""Shared pytest wiring.

The acceptance tests register one line per numbered criterion; the
terminal-summary hook prints them after the run so the pass/fail ledger
is visible even under default output capture.
"""

_CRITERION_LINES = {}


def record_criterion(num: int, ok: bool, detail: str) -> bool:
    _CRITERION_LINES[num] = f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}"
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[num])
