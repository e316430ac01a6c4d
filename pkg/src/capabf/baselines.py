"""Comparison baselines: discrete arrays (SPDA) and a coupling-free CAPA.

The discrete array carries piecewise-constant current patches of area
``spacing**2`` centered on a uniform grid inside the aperture. Its coupling
matrix samples the same radiated kernel used for the continuous aperture,
so shrinking the spacing approaches the CAPA power form.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .coupling import uncoupled_kernel
from .em import c_rad_analytic, channel_response
from .exceptions import DegenerateError, InvalidParameterError
from .quadrature import build_aperture_grid, gauss_legendre
from .wmmse import SolverConfig, channel_matrix, run_wmmse, solve_channel

COUPLING_MODES = ("sampled-kernel", "none")
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class DiscreteArray:
    """Uniform planar array of current patches.

    Attributes
    ----------
    spacing : float
        Element pitch (m); each element occupies ``spacing**2``.
    positions : ndarray, shape (N, 3)
        Element centers.
    shape : tuple of int
        ``(nx, ny)``; positions are flattened row-major over it.
    coupling : str
        ``"sampled-kernel"`` or ``"none"``.
    """

    spacing: float
    positions: np.ndarray
    shape: tuple
    aperture: object
    coupling: str = "sampled-kernel"

    @property
    def element_area(self):
        return self.spacing ** 2

    @property
    def size(self):
        return self.positions.shape[0]


def spda_array(aperture, spacing, coupling="sampled-kernel"):
    """Place ``floor(L / spacing)`` elements per axis, symmetric about the aperture center."""
    if coupling not in COUPLING_MODES:
        raise InvalidParameterError(f"coupling must be one of {COUPLING_MODES}, got {coupling!r}")
    if not spacing > 0:
        raise InvalidParameterError("spacing must be positive")
    nx = int(np.floor(aperture.lx / spacing + _FLOOR_SLACK))
    ny = int(np.floor(aperture.ly / spacing + _FLOOR_SLACK))
    if nx < 1 or ny < 1:
        raise DegenerateError(
            f"spacing {spacing} exceeds the aperture ({aperture.lx} x {aperture.ly}); no elements fit")
    x = (np.arange(nx) - (nx - 1) / 2.0) * spacing
    y = (np.arange(ny) - (ny - 1) / 2.0) * spacing
    pos = np.column_stack([np.repeat(x, ny), np.tile(y, nx), np.zeros(nx * ny)])
    pos += np.asarray(aperture.center)
    pos.setflags(write=False)
    return DiscreteArray(spacing=float(spacing), positions=pos, shape=(nx, ny),
                         aperture=aperture, coupling=coupling)


def spda_coupling_matrix(array, medium):
    """Sampled-kernel coupling matrix ``C`` with ``0.5 p^H C p`` the transmit power.

    The array is a regular grid, so ``C`` is block Toeplitz: the kernel is
    evaluated once per index offset and then gathered.
    """
    nx, ny = array.shape
    ae = array.element_area
    dx = np.arange(-(nx - 1), nx) * array.spacing
    dy = np.arange(-(ny - 1), ny) * array.spacing
    offs = np.stack(np.meshgrid(dx, dy, indexing="ij"), axis=-1)
    offs = np.concatenate([offs, np.zeros(offs.shape[:-1] + (1,))], axis=-1)
    table = c_rad_analytic(offs, medium) * ae * ae
    ix = np.repeat(np.arange(nx), ny)
    iy = np.tile(np.arange(ny), nx)
    c = table[ix[:, None] - ix[None, :] + nx - 1, iy[:, None] - iy[None, :] + ny - 1]
    c[np.diag_indices_from(c)] += medium.zs * ae
    return c


def spda_power_matrix(array, medium):
    """Power matrix used by the solver.

    Coupled arrays use the full ``C``. Uncoupled arrays keep only its
    diagonal, i.e. each element's self-power with the cross terms dropped.
    """
    c = spda_coupling_matrix(array, medium)
    if array.coupling == "none":
        return np.diag(np.diag(c).copy())
    return c


def spda_channel(array, scene, medium):
    """``H[k, n] = h_k(p_n) * element_area``."""
    diff = scene.positions[:, None, :] - array.positions[None, :, :]
    return channel_response(medium, diff, np.zeros(3)) * array.element_area


def spda_operator(array, medium):
    """Power matrix and its Cholesky factor; reusable across scenes on the same array.

    Uncoupled arrays return the diagonal as a vector and ``None`` for the
    factor, so large arrays never form a dense matrix.
    """
    if array.coupling == "none":
        ae = array.element_area
        self_power = float(np.real(c_rad_analytic(np.zeros(3), medium))) * ae * ae + medium.zs * ae
        return np.full(array.size, self_power), None
    c = spda_power_matrix(array, medium)
    return c, scipy.linalg.cho_factor(c)


def spda_solve(array, scene, medium, power, config=None, operator=None):
    """Classical matrix WMMSE for the discrete array under ``0.5 p^H C p <= P_T``.

    ``operator`` is an optional precomputed :func:`spda_operator` result.
    Returns a :class:`~capabf.wmmse.WmmseResult`; its ``w`` holds element
    currents (N x K).
    """
    config = config or SolverConfig()
    if not power > 0:
        raise InvalidParameterError("transmit power must be positive")
    c, chol = operator if operator is not None else spda_operator(array, medium)
    h = spda_channel(array, scene, medium)

    def power_of(w):
        cw = c[:, None] * w if chol is None else c @ w
        return 0.5 * float(np.real(np.sum(w.conj() * cw)))

    def gtilde_of(v):
        g = h.conj().T * v[None, :]
        gamma = g / c[:, None] if chol is None else scipy.linalg.cho_solve(chol, g)
        return gamma, g.conj().T @ gamma

    if config.init == "matched-filter":
        w0 = h.conj().T.copy()
    else:
        rng = np.random.default_rng(config.seed)
        w0 = rng.standard_normal((array.size, scene.n_users)) \
            + 1j * rng.standard_normal((array.size, scene.n_users))
    w0 = w0 * np.sqrt(power / power_of(w0))
    return run_wmmse(gains_of=lambda w: h @ w, power_of=power_of, gtilde_of=gtilde_of,
                     noise_powers=scene.noise_powers, power=power, w0=w0, config=config)


def capa_no_coupling_solve(scene, aperture, medium, power, config=None):
    """CAPA WMMSE with the power constraint ``0.5 int |w|^2 <= P_T`` (no coupling)."""
    config = config or SolverConfig()
    grid = build_aperture_grid(aperture, gauss_legendre(config.order))
    approx = uncoupled_kernel(grid)
    unit = dataclasses.replace(medium, zs=1.0)
    h = channel_matrix(scene, grid, medium)
    return solve_channel(h, scene.noise_powers, grid, approx, unit, power, config)


__all__ = ["DiscreteArray", "spda_array", "spda_coupling_matrix", "spda_power_matrix",
           "spda_channel", "spda_operator", "spda_solve", "capa_no_coupling_solve", "COUPLING_MODES"]
