import importlib

import numpy as np
import pytest
from hypothesis import settings

from excerptlab._kernels import _fallback

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def _compiled():
    try:
        return importlib.import_module("excerptlab._kernels._ckernels")
    except ImportError:
        return None


COMPILED = _compiled()
BACKENDS = [pytest.param(_fallback, id="python")]
if COMPILED is not None:
    BACKENDS.append(pytest.param(COMPILED, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# --- acceptance reporting ------------------------------------------------------

_CRITERIA: dict[int, list[tuple[str, bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, label): acceptance criterion number and label")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        n, label = mark.args
        _CRITERIA.setdefault(n, []).append((label, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        parts = _CRITERIA[n]
        ok = all(p for _, p in parts)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
        for label, passed in parts:
            tr.write_line(f"    {'pass' if passed else 'FAIL'}  {label}")
