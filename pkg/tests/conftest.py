import pytest

_criteria: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "acceptance" in report.keywords:
        name = report.nodeid.split("::")[-1]
        _criteria.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria:
        terminalreporter.write_line(f"{outcome}  {name}")
