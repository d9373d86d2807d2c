import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", deadline=None, max_examples=100)
settings.load_profile("repo")

ACCEPTANCE = {
    1: "exact Theorem A expectation and 1/sqrt(n) scaling",
    2: "Theorem A Monte Carlo matches the exact value",
    3: "Theorem A tail probability positive and stable",
    4: "Theorem B large-weight implication never fails",
    5: "Theorem B collapse frequency non-decreasing in n",
    6: "Theorem C rate slope and 1/sqrt(n) contrast",
    7: "isomorphism violation frequency at x = 3",
    8: "psi range, fixed example and truncation",
    9: "Berry-Esseen, gamma_1 quantile and lemma part 1",
    10: "CSV byte-identical across worker counts",
}
_outcomes: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        ok = _outcomes.get(marker.args[0], True)
        _outcomes[marker.args[0]] = ok and not failed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        if k in _outcomes:
            status = "PASS" if _outcomes[k] else "FAIL"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {ACCEPTANCE[k]}")
