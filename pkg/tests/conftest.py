"""Prints one verdict line per acceptance gate after the run."""

from __future__ import annotations

_verdicts: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    _verdicts[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_verdicts):
        name = nodeid.rsplit("::", 1)[-1]
        outcome = _verdicts[nodeid]
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome,
                                                           outcome.upper())
        terminalreporter.write_line(f"{name}: {verdict}")
