import numpy as np
import pytest

from carleman_cip.forward import BoundaryData
from carleman_cip.model import CoefficientProfile, ForwardGrid, InversionGrid, make_true_profile
from carleman_cip.pipeline import simulate_data


@pytest.fixture(scope="session")
def forward_grid():
    return ForwardGrid()


@pytest.fixture(scope="session")
def homogeneous_data(forward_grid):
    """Noiseless corrected data for c = 1 at the reference resolution."""
    x = forward_grid.x
    return simulate_data(CoefficientProfile(x, np.ones_like(x)), forward_grid, 1 / 150)


@pytest.fixture(scope="session")
def test1_data(forward_grid):
    """Test 1 data with the reference noise level and seed."""
    return simulate_data(make_true_profile(1, forward_grid), forward_grid, 1 / 150, delta=0.05, seed=0)


@pytest.fixture
def small_grid():
    return InversionGrid(eps=1 / 150, xmax=1.2, T=1.5, Mx=25, Mt=16)


def affine_data(times, a=0.5, c=0.0):
    """g0 = a + c t, g1 = 0: q = a + c t is then feasible and PDE-exact."""
    return BoundaryData(times, a + c * times, np.zeros_like(times), eps=1 / 150)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
