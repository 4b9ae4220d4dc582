"""Collects the outcome of every acceptance criterion and prints one line per criterion."""

import pytest

_RESULTS = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def detail(request):
    """Append a measured value to the criterion line of the running test."""
    mark = request.node.get_closest_marker("criterion")

    def add(text):
        _DETAILS.setdefault(mark.args[0], []).append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.skipped or rep.failed):
        return
    number, title = mark.args
    status = "SKIP" if rep.skipped else "FAIL" if rep.failed else "PASS"
    if rep.skipped and isinstance(rep.longrepr, tuple):
        _DETAILS.setdefault(number, []).append(rep.longrepr[2].removeprefix("Skipped: "))
    prev = _RESULTS.get(number, (title, "PASS"))[1]
    if prev == "FAIL" or (prev == "SKIP" and status == "PASS"):
        status = prev
    _RESULTS[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status = _RESULTS[number]
        extra = "; ".join(_DETAILS.get(number, []))
        terminalreporter.write_line(f"criterion {number} {status}: {title}" + (f" ({extra})" if extra else ""))
