import re

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = re.search(r"test_acceptance\.py::test_(c\d+[a-z_0-9]*)", report.nodeid)
    if match:
        _ACCEPTANCE_RESULTS[match.group(1)] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[acceptance] {name}: {_ACCEPTANCE_RESULTS[name]}")
