import numpy as np
import pytest

from capabf.coupling import build_kernel_approx
from capabf.em import Aperture, UserScene, medium_from_config
from capabf.quadrature import gauss_legendre
from capabf.wmmse import channel_matrix


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


@pytest.fixture(scope="session")
def medium():
    return medium_from_config(2.4e9)


@pytest.fixture(scope="session")
def aperture():
    return Aperture(0.5, 0.5)


@pytest.fixture(scope="session")
def approx30(medium, aperture):
    return build_kernel_approx(medium, aperture, gauss_legendre(30))


@pytest.fixture(scope="session")
def small_aperture():
    return Aperture(0.05, 0.05)


@pytest.fixture(scope="session")
def approx8(medium, small_aperture):
    return build_kernel_approx(medium, small_aperture, gauss_legendre(8))


@pytest.fixture(scope="session")
def small_scene():
    return UserScene(np.array([[3.0, -2.0, 4.0], [-2.0, 1.0, 5.0]]), 1e-3)


@pytest.fixture(scope="session")
def h8(small_scene, approx8, medium):
    return channel_matrix(small_scene, approx8.grid, medium)


def smooth_columns(grid, n, seed):
    """Random low-order polynomial columns on ``grid`` (complex)."""
    rng = np.random.default_rng(seed)
    ap = grid.aperture
    x = (grid.points[:, 0] - ap.center[0]) / (ap.lx / 2.0)
    y = (grid.points[:, 1] - ap.center[1]) / (ap.ly / 2.0)
    cols = []
    for _ in range(n):
        c = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        cols.append(sum(c[i, j] * x ** i * y ** j for i in range(3) for j in range(3)))
    return np.column_stack(cols)


def rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b)))
