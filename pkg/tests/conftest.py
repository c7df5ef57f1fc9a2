import time
from collections import OrderedDict

import numpy as np
import pytest

from snakelp import edgemap, imagecore

# criterion number -> [title, passed?, seconds]
_ACCEPTANCE: "OrderedDict[int, list]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


def pytest_runtest_setup(item):
    item._started = time.perf_counter()


def pytest_runtest_logreport(report):
    mark = getattr(report, "_acceptance", None)
    if mark is None:
        return
    number, title = mark
    entry = _ACCEPTANCE.setdefault(number, [title, True, 0.0])
    if report.when == "call":
        entry[2] += report.duration
    if report.failed or (report.when == "call" and report.skipped):
        entry[1] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        outcome.get_result()._acceptance = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, seconds = _ACCEPTANCE[number]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}  ({seconds:.1f}s)")


@pytest.fixture(scope="session")
def arrow():
    return imagecore.generate_shape("arrow", 400, 320)


@pytest.fixture(scope="session")
def arrow_pack(arrow):
    return edgemap.build_edges(arrow)


def random_sample(rng, T, M):
    """PointSample with T random values, the first M of them marked as edges."""
    values = rng.uniform(0.0, 1.0, T)
    values[0], values[-1] = 0.0, 1.0
    coords = np.column_stack([np.arange(T) // 37, np.arange(T) % 37])
    return edgemap.PointSample(coords, values, np.arange(M))
