import numpy as np
import pytest

from tomocouple.core import Geometry
from tomocouple.projectors import _kernels_numba, _kernels_numpy


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["numba", "numpy"])
def kernels(request):
    return _kernels_numba if request.param == "numba" else _kernels_numpy


@pytest.fixture(scope="session")
def small_geometry():
    return Geometry(20, 16)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[props["criterion"]] = ("PASS" if report.passed else "FAIL", props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda c: int(c.split()[0])):
        status, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{status} criterion {name}" + (f" | {detail}" if detail else ""))
