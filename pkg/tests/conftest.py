import numpy as np
import pytest

from hybridmixed.mesh import TriMesh

_CRITERIA = {}


def record_criterion(number, passed, detail):
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    _CRITERIA[number] = line
    print(line)
    return line


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])


@pytest.fixture
def skew_triangle():
    return TriMesh(np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]), np.array([[0, 1, 2]]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
