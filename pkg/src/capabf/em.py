"""Physical constants, Green's functions and the radiated coupling kernel.

All point-pair functions take difference vectors ``d`` of shape ``(..., 3)``
and are vectorized over the leading axes. Only the yy-polarized component
is modelled: transmitter and receivers are all aligned with the y-axis.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .exceptions import (BranchSingularityError, DimensionError,
                         InvalidParameterError, SingularityError)

SPEED_OF_LIGHT = 299792458.0
FREE_SPACE_IMPEDANCE = 120.0 * np.pi
COPPER_CONDUCTIVITY = 5.8e7
VACUUM_PERMEABILITY = 4e-7 * np.pi
Y_AXIS = (0.0, 1.0, 0.0)

# kappa0*|d| below this switches phi-family evaluation to its Taylor series
_SERIES_THRESHOLD = 0.5
_SERIES_TERMS = 12
_BRANCH_TOL = 1e-9


@dataclass(frozen=True)
class Medium:
    fc: float
    wavelength: float
    kappa0: float
    z0: float
    sigma_s: float
    mu_s: float
    zs: float


def medium_from_config(fc, sigma_s=COPPER_CONDUCTIVITY, mu_s=VACUUM_PERMEABILITY,
                       z0=FREE_SPACE_IMPEDANCE):
    """Derive wavelength, wavenumber and surface resistance for a carrier.

    The surface resistance of a good conductor is ``sqrt(pi fc mu_s / sigma_s)``.
    """
    for name, value in (("fc", fc), ("sigma_s", sigma_s), ("mu_s", mu_s), ("z0", z0)):
        if not np.isfinite(value) or value <= 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    fc = float(fc)
    wavelength = SPEED_OF_LIGHT / fc
    return Medium(
        fc=fc,
        wavelength=wavelength,
        kappa0=2.0 * np.pi * fc / SPEED_OF_LIGHT,
        z0=float(z0),
        sigma_s=float(sigma_s),
        mu_s=float(mu_s),
        zs=float(np.sqrt(np.pi * fc * mu_s / sigma_s)),
    )


@dataclass(frozen=True)
class Aperture:
    """Rectangular planar aperture parallel to the x-y plane."""

    lx: float
    ly: float
    center: tuple = (0.0, 0.0, 0.0)
    polarization: tuple = Y_AXIS

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise InvalidParameterError(
                f"aperture dimensions must be positive, got {self.lx} x {self.ly}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if tuple(self.polarization) != Y_AXIS:
            raise InvalidParameterError("only y-polarized apertures are supported")

    @property
    def area(self):
        return self.lx * self.ly


@dataclass(frozen=True)
class UserScene:
    """Single-antenna, y-polarized users with per-user noise power (W)."""

    positions: np.ndarray
    noise_powers: np.ndarray
    polarization: tuple = field(default=Y_AXIS)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise DimensionError(f"positions must have shape (K, 3), got {pos.shape}")
        noise = np.broadcast_to(np.asarray(self.noise_powers, dtype=float),
                                (pos.shape[0],)).copy()
        if np.any(~np.isfinite(noise)) or np.any(noise <= 0):
            raise InvalidParameterError("noise powers must be positive")
        if tuple(self.polarization) != Y_AXIS:
            raise InvalidParameterError("only y-polarized users are supported")
        pos.setflags(write=False)
        noise.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "noise_powers", noise)

    @property
    def n_users(self):
        return self.positions.shape[0]


def _as_points(d):
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != 3:
        raise DimensionError(f"difference vectors must have a trailing axis of 3, got {d.shape}")
    return d


def _checked_norm(d):
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise SingularityError("Green's function evaluated at coincident points")
    return r


def scalar_green(d, medium):
    """exp(j k0 |d|) / (4 pi |d|)."""
    d = _as_points(d)
    r = _checked_norm(d)
    return np.exp(1j * medium.kappa0 * r) / (4.0 * np.pi * r)


def d2y_scalar_green(d, medium):
    """Second partial derivative of the scalar Green's function along y."""
    d = _as_points(d)
    r = _checked_norm(d)
    k = medium.kappa0
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    a = 1j * k - 1.0 / r
    cos2 = (d[..., 1] / r) ** 2
    # radial g' = g a, g'' = g (a^2 + 1/r^2)
    return g * ((a * a + 1.0 / r ** 2) * cos2 + a / r * (1.0 - cos2))


def channel_response(medium, r, s):
    """yy-component of the dyadic Green's function between source ``s`` and field point ``r``."""
    d = _as_points(r) - _as_points(s)
    k = medium.kappa0
    return -1j * k * medium.z0 * (scalar_green(d, medium) + d2y_scalar_green(d, medium) / k ** 2)


def _phi_radial(r, k):
    """phi(r) together with F'(u), F''(u) where phi = F(u), u = r**2.

    With these, d2/dy2 phi = 2 F'(u) + 4 y**2 F''(u), which stays finite at r = 0.
    """
    x = k * r
    phi = np.empty_like(r)
    f1 = np.empty_like(r)
    f2 = np.empty_like(r)
    small = x < _SERIES_THRESHOLD
    big = ~small
    if np.any(big):
        rb, xb = r[big], x[big]
        s, c = np.sin(xb), np.cos(xb)
        phi[big] = s / (4.0 * np.pi * rb)
        dphi = (xb * c - s) / (4.0 * np.pi * rb ** 2)
        d2phi = (-xb * xb * s - 2.0 * xb * c + 2.0 * s) / (4.0 * np.pi * rb ** 3)
        f1[big] = dphi / (2.0 * rb)
        f2[big] = (d2phi - dphi / rb) / (4.0 * rb ** 2)
    if np.any(small):
        u = (r[small] * k) ** 2
        # phi = k/(4 pi) sum_n (-1)^n (k^2 u')^n / (2n+1)!, with u' = r^2
        p0 = np.zeros_like(u)
        p1 = np.zeros_like(u)
        p2 = np.zeros_like(u)
        for n in range(_SERIES_TERMS, -1, -1):
            coef = (-1.0) ** n / factorial(2 * n + 1)
            p0 = p0 * u + coef
            if n >= 1:
                p1 = p1 * u + coef * n
            if n >= 2:
                p2 = p2 * u + coef * n * (n - 1)
        # Horner above leaves p1 = sum_{n>=1} n c_n u^(n-1); p2 similarly shifted by 2
        phi[small] = k / (4.0 * np.pi) * p0
        f1[small] = k ** 3 / (4.0 * np.pi) * p1
        f2[small] = k ** 5 / (4.0 * np.pi) * p2
    return phi, f1, f2


def phi(d, medium):
    """Imaginary part of the scalar Green's function, sin(k0 |d|) / (4 pi |d|).

    Total: the removable singularity at d = 0 evaluates to k0 / (4 pi).
    """
    d = _as_points(d)
    r = np.linalg.norm(d, axis=-1)
    val, _, _ = _phi_radial(np.atleast_1d(r).astype(float), medium.kappa0)
    return val.reshape(r.shape)


def d2y_phi(d, medium):
    d = _as_points(d)
    r = np.atleast_1d(np.linalg.norm(d, axis=-1))
    _, f1, f2 = _phi_radial(r.astype(float), medium.kappa0)
    y = np.atleast_1d(d[..., 1])
    return (2.0 * f1 + 4.0 * y * y * f2).reshape(np.shape(d)[:-1])


def c_rad_analytic(d, medium):
    """Radiated mutual-coupling kernel k0 Z0 (phi + d2y phi / k0^2)."""
    d = _as_points(d)
    k = medium.kappa0
    r = np.atleast_1d(np.linalg.norm(d, axis=-1)).astype(float)
    val, f1, f2 = _phi_radial(r, k)
    y = np.atleast_1d(d[..., 1])
    out = k * medium.z0 * (val + (2.0 * f1 + 4.0 * y * y * f2) / k ** 2)
    return out.reshape(np.shape(d)[:-1])


def _kappa_norm(kappa, medium):
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape[-1] not in (2, 3):
        raise DimensionError(f"wavenumber vectors must have 2 or 3 components, got {kappa.shape}")
    kn = np.linalg.norm(kappa[..., :2], axis=-1)
    if np.any(np.abs(kn - medium.kappa0) <= _BRANCH_TOL * medium.kappa0):
        raise BranchSingularityError("wavenumber on the |kappa| = kappa0 circle")
    return kappa, kn


def ft_phi(kappa, medium):
    """2-D Fourier transform of phi: 1 / (2 sqrt(k0^2 - |kappa|^2)) inside the disc, 0 outside."""
    kappa, kn = _kappa_norm(kappa, medium)
    k = medium.kappa0
    inside = kn < k
    out = np.zeros_like(kn)
    out[inside] = 0.5 / np.sqrt(k * k - kn[inside] ** 2)
    return out


def c_rad_wavenumber(kappa, medium):
    """Wavenumber-domain radiated kernel, zero outside the visible disc."""
    kappa, kn = _kappa_norm(kappa, medium)
    k = medium.kappa0
    inside = kn < k
    ky = kappa[..., 1]
    out = np.zeros_like(kn)
    out[inside] = (medium.z0 * (1.0 - ky[inside] ** 2 / k ** 2)
                   / (2.0 * np.sqrt(1.0 - kn[inside] ** 2 / k ** 2)))
    return out
