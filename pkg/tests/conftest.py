import collections

import numpy as np
import pytest

from ehstorage import BufferSpec, EffectiveParams, LinkParams

_CRITERIA = collections.OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    n, title = marker.args
    entry = _CRITERIA.setdefault(n, {"title": title, "passed": True, "tests": 0})
    if report.when == "call":
        entry["tests"] += 1
    if report.failed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {e['title']} ({e['tests']} tests)")


@pytest.fixture
def ref_link():
    return LinkParams.from_db(24.6)


@pytest.fixture
def ref_eff():
    """delta_tilde = 0.965 with beta * Xbar = 1e-5 J."""
    return EffectiveParams(9.65e-6, 1e-5)


@pytest.fixture
def unit_buffer():
    def make(l):
        return BufferSpec.finite(l, 1.0)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(7)
