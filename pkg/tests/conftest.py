"""Pytest hooks: print one verdict line per acceptance criterion."""
from __future__ import annotations

import _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion, name, ok, detail in sorted(_report.RESULTS):
        line = f"[acceptance {criterion}] {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        tr.write_line(line)
    exercised = {r[0] for r in _report.RESULTS}
    missing = sorted(set(_report.CRITERIA) - exercised)
    if missing:
        tr.write_line(
            "criteria not exercised this run: "
            + ", ".join(str(c) for c in missing)
        )
