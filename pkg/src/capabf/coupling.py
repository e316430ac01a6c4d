"""Plane-wave approximation of the radiated coupling kernel and its inverse.

The radiated kernel is the inverse 2-D Fourier transform of ``C_rad`` over
the visible disc. Gauss-Legendre quadrature of that integral turns it into a
finite sum of ``I = M**2`` plane waves ``sum_i rho_i exp(j kappa_i . s)``,
after which the coupling operator ``Zs * delta + sum_i ...`` has an inverse
in closed form through the ``I x I`` matrix ``D = (I + Lambda Q)^-1``.

Two node maps are available for the inner (kappa_y) integral:

``"linear"``
    kappa_y = a * theta, the direct Gauss-Legendre map. The integrand has an
    inverse-square-root endpoint singularity, so accuracy improves only
    algebraically in M.
``"arcsine"``
    kappa_y = a * sin(pi theta / 2). The substitution cancels the endpoint
    singularity and the sum converges geometrically. Default.

The Dirac (dissipated) part never touches the grid; it enters only through
``Zs`` coefficients.
"""

from dataclasses import dataclass

import numpy as np

from .em import c_rad_wavenumber
from .exceptions import DimensionError, InvalidParameterError
from .quadrature import build_aperture_grid

NODE_MAPS = ("arcsine", "linear")


@dataclass(frozen=True)
class KernelApprox:
    """Plane-wave expansion of the radiated kernel on one aperture grid.

    Attributes
    ----------
    order : int
        Quadrature order M used in the wavenumber domain.
    rho : ndarray, shape (I,)
        Positive expansion weights.
    kappas : ndarray, shape (I, 3)
        Wavenumber vectors, all strictly inside the visible disc.
    lambda_diag : ndarray, shape (I,)
        Diagonal of ``Lambda = diag(rho) / Zs``.
    q : ndarray, shape (I, I)
        Aperture Gram matrix of the plane waves (closed-form sinc product).
    d : ndarray, shape (I, I)
        ``(I + Lambda Q)^-1``.
    x : ndarray, shape (I, I_grid)
        Plane-wave sampling matrix, ``x[i, n] = exp(-j kappa_i . (s_n - c))``.
    zs : float
        Surface resistance the inverse was built for.
    grid : ApertureGrid
    """

    order: int
    rho: np.ndarray
    kappas: np.ndarray
    lambda_diag: np.ndarray
    q: np.ndarray
    d: np.ndarray
    x: np.ndarray
    zs: float
    grid: object
    node_map: str = "arcsine"

    @property
    def count(self):
        return self.rho.shape[0]

    @property
    def d_lambda(self):
        return self.d * self.lambda_diag[None, :]


def _wavenumber_nodes(medium, rule, node_map):
    k0 = medium.kappa0
    theta, omega = rule.nodes, rule.weights
    m = rule.order
    kx = k0 * theta
    wx = k0 * omega
    a = np.sqrt(k0 * k0 - kx * kx)
    kx_flat = np.repeat(kx, m)
    wx_flat = np.repeat(wx, m)
    if node_map == "linear":
        ky = np.outer(a, theta).ravel()
        wy = np.outer(a, omega).ravel()
        kap = np.column_stack([kx_flat, ky, np.zeros(m * m)])
        rho = wx_flat * wy * c_rad_wavenumber(kap, medium) / (2.0 * np.pi) ** 2
    elif node_map == "arcsine":
        t = 0.5 * np.pi * theta
        ky = np.outer(a, np.sin(t)).ravel()
        kap = np.column_stack([kx_flat, ky, np.zeros(m * m)])
        # dky = a cos(t) pi/2 dtheta cancels the 1/sqrt in C_rad analytically
        rho = (wx_flat * np.tile(0.5 * np.pi * omega, m)
               * 0.5 * medium.z0 * k0 * (1.0 - ky * ky / (k0 * k0)) / (2.0 * np.pi) ** 2)
    else:
        raise InvalidParameterError(f"unknown node map {node_map!r}; expected one of {NODE_MAPS}")
    if np.any(np.linalg.norm(kap[:, :2], axis=1) >= k0):
        raise AssertionError("plane-wave node outside the visible disc")
    return rho, kap


def plane_wave_gram(kappas, lx, ly):
    """Closed-form ``int exp(j kappa_i' . s) exp(-j kappa_i . s) ds`` over a centered rectangle."""
    dkx = kappas[:, None, 0] - kappas[None, :, 0]
    dky = kappas[:, None, 1] - kappas[None, :, 1]
    # np.sinc is sin(pi x) / (pi x)
    return lx * ly * np.sinc(lx * dkx / (2.0 * np.pi)) * np.sinc(ly * dky / (2.0 * np.pi))


def _inverse_factor(lam, q):
    n = lam.shape[0]
    a = np.eye(n) + lam[:, None] * q
    # solving the transposed system makes D a good left inverse: D (I + Lambda Q) ~ I
    return np.linalg.solve(a.T, np.eye(n)).T


def build_kernel_approx(medium, aperture, rule, node_map="arcsine"):
    """Build the plane-wave kernel expansion and the inverse-kernel matrices."""
    if rule.order < 2:
        raise InvalidParameterError("kernel approximation needs quadrature order >= 2")
    grid = build_aperture_grid(aperture, rule)
    rho, kap = _wavenumber_nodes(medium, rule, node_map)
    lam = rho / medium.zs
    q = plane_wave_gram(kap, aperture.lx, aperture.ly)
    d = _inverse_factor(lam, q)
    local = grid.points - np.asarray(aperture.center)
    x = np.exp(-1j * kap @ local.T)
    for arr in (rho, kap, lam, q, d, x):
        arr.setflags(write=False)
    return KernelApprox(order=rule.order, rho=rho, kappas=kap, lambda_diag=lam, q=q, d=d,
                        x=x, zs=medium.zs, grid=grid, node_map=node_map)


def uncoupled_kernel(grid):
    """A kernel with no radiated part: the coupling operator reduces to ``zs * delta``.

    Used with a unit surface resistance to model the coupling-free power
    ``0.5 * int |w|^2``.
    """
    empty = np.zeros(0)
    return KernelApprox(order=0, rho=empty, kappas=np.zeros((0, 3)), lambda_diag=empty,
                        q=np.zeros((0, 0)), d=np.zeros((0, 0)),
                        x=np.zeros((0, grid.size), dtype=complex), zs=1.0, grid=grid,
                        node_map="none")


def kernel_approx_eval(approx, s):
    """Evaluate ``sum_i rho_i exp(j kappa_i . s)`` at difference vectors ``s``."""
    s = np.asarray(s, dtype=float)
    phase = np.tensordot(s, approx.kappas, axes=([-1], [1]))
    return np.exp(1j * phase) @ approx.rho


def _check_rows(samples, n, what="samples"):
    samples = np.asarray(samples)
    if samples.shape[0] != n:
        raise DimensionError(f"{what} must have {n} rows, got {samples.shape[0]}")
    return samples


def projections(approx, samples):
    """Plane-wave coefficients ``X Phi f`` (one row per plane wave)."""
    grid = approx.grid
    samples = _check_rows(samples, grid.size)
    if samples.ndim == 1:
        return approx.x @ (grid.phi_weights * samples)
    return approx.x @ (grid.phi_weights[:, None] * samples)


def em_power(w, grid, approx, medium):
    """Transmit EM power ``0.5 * int int w c_T w^H`` of beamformer samples ``w`` (I x K)."""
    w = _check_rows(np.asarray(w), grid.size, "beamformer")
    if w.ndim == 1:
        w = w[:, None]
    if approx.x.shape[1] != grid.size:
        raise DimensionError("kernel approximation was built on a different grid")
    diss = medium.zs * np.sum(grid.phi_weights[:, None] * np.abs(w) ** 2)
    proj = projections(approx, w)
    rad = np.sum(approx.rho[:, None] * np.abs(proj) ** 2)
    return 0.5 * float(diss + rad)


def apply_kernel(approx, medium, samples):
    """Forward coupling operator ``f -> Zs f + int c_rad(s - z) f(z) dz`` on grid samples."""
    samples = np.asarray(samples)
    proj = projections(approx, samples)
    if samples.ndim == 1:
        return medium.zs * samples + approx.x.conj().T @ (approx.rho * proj)
    return medium.zs * samples + approx.x.conj().T @ (approx.rho[:, None] * proj)


def apply_inverse_kernel(approx, medium, samples):
    """Inverse coupling operator applied to grid samples.

    ``(1/Zs) (f - X^H D Lambda X Phi f)``.
    """
    samples = np.asarray(samples)
    proj = projections(approx, samples)
    if samples.ndim == 1:
        corr = approx.d @ (approx.lambda_diag * proj)
    else:
        corr = approx.d @ (approx.lambda_diag[:, None] * proj)
    return (samples - approx.x.conj().T @ corr) / medium.zs


def d_residual(approx):
    """``||D (I + Lambda Q) - I||_F / sqrt(I)``."""
    n = approx.count
    if n == 0:
        return 0.0
    a = np.eye(n) + approx.lambda_diag[:, None] * approx.q
    return float(np.linalg.norm(approx.d @ a - np.eye(n)) / np.sqrt(n))
