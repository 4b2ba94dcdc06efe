import numpy as np
import pytest

from eigctrl.fields import double_well_field, zero_field
from eigctrl.grid import Grid1D, schrodinger_fd_1d, to_L_eigenfunctions
from eigctrl.problem import SocProblem, point_mass


def dw1d_potential(kappa=5.0, nu=3.0, beta=1.0):
    """Schrodinger potential of the 1-D double well E = kappa (x^2-1)^2."""

    def v(x):
        gE = 4.0 * kappa * x * (x ** 2 - 1.0)
        lapE = kappa * (12.0 * x ** 2 - 4.0)
        return beta ** 2 * gE ** 2 - beta * lapE + 2.0 * beta ** 2 * nu * (x ** 2 - 1.0) ** 2

    return v


@pytest.fixture(scope="session")
def dw1d_grid_sys():
    """Reference 1-D double-well eigensystem (kappa=5, nu=3), k=8, n=2000."""
    return schrodinger_fd_1d(dw1d_potential(), Grid1D(-8.0, 8.0, 2000), 8)


@pytest.fixture(scope="session")
def dw1d_problem():
    return SocProblem(
        dim=1,
        energy=double_well_field([5.0]),
        running_cost=double_well_field([3.0]),
        terminal_cost=zero_field(),
        beta=1.0,
        horizon=4.0,
        initial_law=point_mass(np.zeros(1)),
    )


@pytest.fixture(scope="session")
def dw1d_lsys(dw1d_grid_sys, dw1d_problem):
    return to_L_eigenfunctions(dw1d_grid_sys, dw1d_problem.energy, 1.0)
