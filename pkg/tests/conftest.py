"""Collects acceptance results and prints one pass/fail line per criterion."""

from collections import defaultdict

import pytest

_RESULTS: dict = defaultdict(list)
_TITLES: dict = {}
_NOTES: dict = defaultdict(list)


@pytest.fixture
def note(request):
    """Attach a short measured value to the criterion line."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        if marker is not None:
            _NOTES[marker.args[0]].append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    _TITLES[number] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _RESULTS[number].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        verdict = "PASS" if all(_RESULTS[number]) else "FAIL"
        notes = "; ".join(_NOTES.get(number, []))
        line = f"criterion {number:2d}  {verdict}  {_TITLES[number]}"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))
