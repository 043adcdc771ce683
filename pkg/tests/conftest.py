"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

CRITERIA = {
    1: "loss fixtures",
    2: "orientation loss double peak",
    3: "cross-entropy gradient check",
    4: "geometry oracles",
    5: "end-to-end oracle",
    6: "robustness floor",
    7: "rotation equivariance",
    8: "evaluator",
    9: "determinism",
}

_outcomes: dict[int, list[bool]] = {}
_details: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.failed or (rep.when == "call" and rep.passed):
        _outcomes.setdefault(n, []).append(rep.passed)
    if rep.when == "call":
        _details.setdefault(n, []).extend(v for k, v in rep.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if all(_outcomes[n]) else "FAIL"
        detail = "; ".join(_details.get(n, []))
        terminalreporter.write_line(f"criterion {n} [{CRITERIA.get(n, '?')}]: {status}" + (f" ({detail})" if detail else ""))
