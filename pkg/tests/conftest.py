"""Prints one pass/fail line per acceptance criterion after the run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        prev = _results.get(n)
        if prev is None or prev[0] == "PASS":
            _results[n] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        status, detail = _results[n]
        line = f"criterion {n:2d}: {status}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail
                                            else ""))
