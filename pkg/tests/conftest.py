import pytest

_CRITERIA: dict[int, list] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker:
            number, title = marker.args
            _CRITERIA.setdefault(number, [title, []])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and (report.when == "call" or report.failed or report.skipped):
        _CRITERIA[marker.args[0]][1].append(report.passed if report.when == "call" else False)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        if not outcomes:
            status = "NOT RUN"
        else:
            status = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
