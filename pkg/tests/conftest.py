"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION.match(item.name)
    if match is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = int(match.group(1)), match.group(2).replace("_", " ")
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    _results[number] = (title, "PASS" if report.passed else "FAIL", details)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, status, details = _results[number]
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {title}")
        for d in details:
            terminalreporter.write_line(f"    {d}")
