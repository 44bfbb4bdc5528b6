import numpy as np
import pytest

from quasiweb.funcs import poly
from quasiweb.quasigroup import RationalQuasigroup

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, text = mark.args
    prev = _criteria.get(number, (text, True))
    _criteria[number] = (text, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, ok = _criteria[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {text}")


@pytest.fixture
def q_sq_cube_lin():
    """f = (x**2, x**3, x), A = a = 0."""
    return RationalQuasigroup(3, (poly([0, 0, 1]), poly([0, 0, 0, 1]), poly([0, 1])))


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
