import pytest

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for mark in report.keywords:
        if mark.startswith("criterion_"):
            _CRITERIA[report.nodeid] = (mark, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (mark, outcome) in sorted(_CRITERIA.items(), key=lambda kv: int(kv[1][0].split("_")[1])):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {mark.split('_')[1]}  {nodeid.split('::')[-1]}")


def pytest_configure(config):
    for k in range(1, 10):
        config.addinivalue_line("markers", f"criterion_{k}: acceptance criterion {k}")
