from __future__ import annotations

import pytest

_RESULTS: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.get_closest_marker("acceptance") is None and "test_acceptance" in item.nodeid:
            item.add_marker(pytest.mark.acceptance)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = f"criterion {marker.args[0]}: {marker.args[1]}"
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _RESULTS.get(key, "PASS")
        _RESULTS[key] = "FAIL" if rep.outcome != "passed" or prev == "FAIL" else "PASS"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion this test checks")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: int(k.split()[1].rstrip(":"))):
        terminalreporter.write_line(f"{_RESULTS[key]}  {key}")
