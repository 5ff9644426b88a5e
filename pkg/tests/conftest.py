import numpy as np
import pytest

from heatflat.flatness import FlatController
from heatflat.spectral import NeumannBasis1D, decompose, double_step

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def basis():
    return NeumannBasis1D(1.0)


@pytest.fixture(scope="session")
def ds_coeffs(basis):
    """Quadrature decomposition of the double step, J=21, N=200."""
    return decompose(double_step, basis, 21, 200)


@pytest.fixture(scope="session")
def ds_controller(ds_coeffs):
    return FlatController(ds_coeffs, 0.05, 0.3, 1.65, 40)


@pytest.fixture(scope="session")
def ds_controller_25(ds_coeffs):
    return FlatController(ds_coeffs, 0.05, 0.3, 1.65, 25)


@pytest.fixture
def acceptance_log():
    def record(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def probe_grid(n=21, L=1.0):
    x1 = np.linspace(0.0, L, n)
    x2 = np.linspace(0.0, 1.0, n)
    return np.meshgrid(x1, x2, indexing="ij")
