"""Test configuration: stable hypothesis profile and the acceptance summary.

Tests marked ``acceptance("<criterion>")`` get one PASS/FAIL/SKIP line each in
the terminal summary so the acceptance status is readable at a glance.
"""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("ci")

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): one named line in the acceptance summary"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    name = marker.args[0]
    if report.when == "setup" and report.skipped:
        _ACCEPTANCE_RESULTS[name] = "SKIP"
    elif report.when == "call":
        current = _ACCEPTANCE_RESULTS.get(name)
        if report.failed or current == "FAIL":
            _ACCEPTANCE_RESULTS[name] = "FAIL"
        elif report.skipped:
            _ACCEPTANCE_RESULTS[name] = "SKIP" if current in (None, "SKIP") else current
        else:
            _ACCEPTANCE_RESULTS[name] = "PASS" if current in (None, "PASS") else current


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"[{status}] {name}")
