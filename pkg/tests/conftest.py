"""Prints one PASS/FAIL/SKIP line per acceptance criterion at the end of a run."""
import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by a test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _outcomes.get(crit, "PASS")
        now = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        # a criterion fails if any of its tests fail
        _outcomes[crit] = "FAIL" if "FAIL" in (prev, now) else ("SKIP" if now == "SKIP" else prev)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), status in sorted(_outcomes.items()):
        terminalreporter.write_line(f"[{status}] {num:>2}. {title}")
