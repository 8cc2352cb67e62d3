import re

_CRITERIA: dict = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if not match:
        return
    key = (int(match.group(1)), match.group(2).replace("_", " "))
    if report.when == "call" or report.outcome != "passed":
        # a setup/teardown failure also marks the criterion as failed
        if key not in _CRITERIA or _CRITERIA[key][0] == "PASS":
            _CRITERIA[key] = ("PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), (status, duration) in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"{status} criterion {num:2d}: {name} ({duration:.2f} s)")
