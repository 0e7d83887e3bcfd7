"""Shared fixtures plus a terminal summary for the acceptance checks.

Tests marked ``@pytest.mark.acceptance("<claim>")`` each get one
PASS/FAIL line at the end of the run so the suite's headline checks can
be read without scrolling through the full report.
"""

import numpy as np
import pytest

from defilter.synthfaces import make_dataset, make_sticker_assets


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(claim): headline check, summarized at exit")


_ACCEPTANCE_RESULTS = []


def pytest_runtest_makereport(item, call):
    if call.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    claim = marker.args[0] if marker.args else item.name
    _ACCEPTANCE_RESULTS.append((claim, call.excinfo is None))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance checks")
    for claim, ok in _ACCEPTANCE_RESULTS:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {claim}")


@pytest.fixture(scope="session")
def face_pool():
    return make_dataset(6, 2, 64, 31, prefix="t_")


@pytest.fixture(scope="session")
def sticker_assets():
    return {a.name: a for a in make_sticker_assets()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
