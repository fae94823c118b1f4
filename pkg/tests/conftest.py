import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from amalgam.spectral import SpectralField

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_field(grid, rng, radius=None, amp=1.0, real_even=False):
    """Random coefficients on a centred box (the whole lattice by default)."""
    radius = grid.offset if radius is None else radius
    c = np.zeros(grid.shape, dtype=np.complex128)
    sl = tuple(slice(grid.offset - radius, grid.offset + radius + 1) for _ in range(grid.dim))
    shape = c[sl].shape
    c[sl] = amp * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if real_even:
        c = 0.5 * (c + c[(slice(None, None, -1),) * grid.dim]).real
    return SpectralField(grid, c, real_even=real_even)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- sweeps --
# The inflation sweeps take tens of seconds, so they are shared session-wide.

THETAS_A = (-0.4, 0.0, 1.0, 2.0)


def smooth_data(s=-0.4):
    """Band-limited Gaussian-profile data of pair norm 1 in the amalgam space."""
    from amalgam.norms import SpaceSpec, pair_norm
    from amalgam.spectral import DataPair, make_grid
    g = make_grid(1, 8)
    xi = g.axis_frequencies()
    band = np.abs(xi) <= 6
    u0 = SpectralField(g, np.where(band, np.exp(-xi ** 2 / 8), 0.0), real_even=True)
    u1 = SpectralField(g, np.where(band, 0.5 * np.exp(-xi ** 2 / 4), 0.0), real_even=True)
    pair = DataPair(u0, u1)
    return pair * (1.0 / pair_norm(pair, SpaceSpec("amalgam", 2, 2, s)))


@pytest.fixture(scope="session")
def sweep_a():
    from amalgam.inflation import InflationConfig, run_inflation
    return run_inflation(None, InflationConfig(thetas=THETAS_A), threads=1)


@pytest.fixture(scope="session")
def sweep_b():
    from amalgam.inflation import InflationConfig, run_inflation
    return run_inflation(None, InflationConfig(s=-1.0, thetas=(-1.0,)), threads=1)


@pytest.fixture(scope="session")
def sweep_general():
    from amalgam.inflation import InflationConfig, run_inflation
    return run_inflation(smooth_data(), InflationConfig(), threads=1)
