import numpy as np
import pytest

from scarsim.dynamics import WavepacketParams, expand, make_gaussian
from scarsim.geometry import Domain, build_grid
from scarsim.spectral import solve_eigensystem


@pytest.fixture(scope="session")
def rect_grid_med():
    return build_grid(Domain.rectangle(1, 1), 0.02)


@pytest.fixture(scope="session")
def rect_basis_med(rect_grid_med):
    return solve_eigensystem(rect_grid_med, e_max=300.0)


@pytest.fixture(scope="session")
def qs_small():
    """Small quarter-stadium run: low-momentum packet with a full basis.

    v = 10, sigma0 = 0.12, center (0.5, 0.4) keeps the Gaussian tail mass
    below the warning threshold; e_max = E0 + 5 v/sigma0 comfortably covers
    the coefficient window.
    """
    params = WavepacketParams.from_polar((0.5, 0.4), 10.0, -0.35, 0.12)
    e_max = params.e0 + 5.0 * params.speed / params.sigma0
    grid = build_grid(Domain.quarter_stadium(), 0.018)
    basis = solve_eigensystem(grid, e_max=e_max)
    psi0 = make_gaussian(params, grid)
    coeffs = expand(basis, psi0)
    return {"params": params, "grid": grid, "basis": basis,
            "psi0": psi0, "coeffs": coeffs}


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7)
