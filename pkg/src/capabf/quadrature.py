"""Gauss-Legendre rules and tensor-product quadrature over rectangular apertures.

Grid points are flattened row-major over (m, m'): flat index ``i = m * M + m'``
(0-based), where ``m`` runs along x and ``m'`` along y. Every module that
builds matrices over aperture samples relies on this convention.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, InvalidParameterError

MAX_ORDER = 200
_NEWTON_TOL = 1e-14
_NEWTON_MAXITER = 100


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on (-1, 1)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def _legendre_and_derivative(n, x):
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(order):
    """Return the ``order``-point Gauss-Legendre rule.

    Roots of P_M are found by Newton iteration from the Tricomi-style
    initial guesses; only the non-negative half is iterated and the
    other half is mirrored, so the rule is exactly symmetric.
    """
    if isinstance(order, bool) or int(order) != order:
        raise InvalidParameterError(f"quadrature order must be an integer, got {order!r}")
    order = int(order)
    if order < 1 or order > MAX_ORDER:
        raise InvalidParameterError(
            f"quadrature order must be in [1, {MAX_ORDER}], got {order}")
    if order == 1:
        return QuadratureRule(1, np.array([0.0]), np.array([2.0]))

    half = order // 2
    idx = np.arange(1, half + 1)
    # descending positive roots
    x = np.cos(np.pi * (idx - 0.25) / (order + 0.5))
    for _ in range(_NEWTON_MAXITER):
        p, dp = _legendre_and_derivative(order, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    _, dp = _legendre_and_derivative(order, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    pos_x = x[::-1]
    pos_w = w[::-1]
    if order % 2:
        _, dp0 = _legendre_and_derivative(order, np.array([0.0]))
        w0 = 2.0 / dp0 ** 2
        nodes = np.concatenate([-x, [0.0], pos_x])
        weights = np.concatenate([w, w0, pos_w])
    else:
        nodes = np.concatenate([-x, pos_x])
        weights = np.concatenate([w, pos_w])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order, nodes, weights)


@dataclass(frozen=True)
class ApertureGrid:
    """Tensor Gauss-Legendre samples of an aperture.

    Attributes
    ----------
    aperture : Aperture
    rule : QuadratureRule
    points : ndarray, shape (I, 3)
        Sample points in meters, ``I = M**2``.
    phi_weights : ndarray, shape (I,)
        Diagonal of the quadrature weight matrix; sums to the aperture area.
    """

    aperture: object
    rule: QuadratureRule
    points: np.ndarray
    phi_weights: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]


def build_aperture_grid(aperture, rule):
    lx, ly = float(aperture.lx), float(aperture.ly)
    if not (lx > 0 and ly > 0):
        raise InvalidParameterError(f"aperture dimensions must be positive, got {lx} x {ly}")
    theta = rule.nodes
    m = rule.order
    center = np.asarray(aperture.center, dtype=float)
    px = np.repeat(theta * lx / 2.0, m)
    py = np.tile(theta * ly / 2.0, m)
    points = np.column_stack([px, py, np.zeros(m * m)]) + center
    phi = (lx * ly / 4.0) * np.outer(rule.weights, rule.weights).ravel()
    points.setflags(write=False)
    phi.setflags(write=False)
    return ApertureGrid(aperture, rule, points, phi)


def surface_integral(samples, grid):
    """Weighted sum of aperture samples; extra trailing axes are integrated columnwise."""
    samples = np.asarray(samples)
    if samples.shape[0] != grid.size:
        raise DimensionError(
            f"expected {grid.size} samples, got leading dimension {samples.shape[0]}")
    return np.tensordot(grid.phi_weights, samples, axes=(0, 0))
