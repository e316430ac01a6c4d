"""scikit-learn style wrappers around the beamforming solvers.

``fit(X)`` takes user positions ``X`` of shape (K, 3) and designs the
transmit beamformer; ``predict(X)`` returns the per-user rates (bits) the
fitted beamformer delivers to users at ``X`` (stream k serves row k), and
``score(X)`` is their sum.
"""

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import spda_array, spda_channel, spda_solve
from .coupling import build_kernel_approx, uncoupled_kernel
from .em import Aperture, UserScene, medium_from_config
from .exceptions import DimensionError, InvalidParameterError
from .mimo import (MimoScene, calibrate_mimo_noise, cross_channel_matrix, mimo_gram,
                   solve_mimo)
from .quadrature import build_aperture_grid, gauss_legendre
from .wmmse import (SolverConfig, channel_matrix, effective_gains, scale_full_power,
                    solve_channel)

_CALIBRATION_SNR = 100.0  # 20 dB


def _check_positions(X, n_users=None):
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != 3:
        raise DimensionError(f"positions must have 3 columns, got {X.shape[1]}")
    if n_users is not None and X.shape[0] != n_users:
        raise DimensionError(f"fitted for {n_users} users, got {X.shape[0]}")
    return X


def _per_user_rates(e, noise):
    p = np.abs(e) ** 2
    sig = np.diagonal(p)
    return np.log2(1.0 + sig / (p.sum(axis=1) - sig + noise))


class _BaseBeamformer(BaseEstimator):
    def _solver_config(self):
        return SolverConfig(max_iters=self.max_iters, rel_tol=self.rel_tol, init=self.init,
                            order=self.order, seed=self.random_state or 0)

    def _medium(self):
        if not self.fc > 0:
            raise InvalidParameterError("fc must be positive")
        return medium_from_config(self.fc)

    def score(self, X, y=None):
        """Sum-rate (bits) delivered to users at ``X``."""
        return float(np.sum(self.predict(X)))


class CapaBeamformer(_BaseBeamformer):
    """Coupling-aware WMMSE beamformer for a rectangular CAPA.

    Parameters
    ----------
    fc : float
        Carrier frequency (Hz).
    lx, ly : float
        Aperture side lengths (m).
    power : float
        Transmit power budget (W).
    noise_power : float or None
        Per-user noise power (W). ``None`` calibrates it so that a single
        user at the centroid of the fitted positions sees 20 dB
        matched-filter SNR.
    order : int
        Gauss-Legendre order M.
    coupling : bool
        If False the power constraint ignores coupling (``0.5 int |w|^2``).

    Attributes
    ----------
    weights_ : ndarray, shape (M**2, K)
        Beamformer samples on the aperture grid.
    sum_rate_ : float
    n_iter_ : int
    converged_ : bool
    noise_power_ : float
    """

    def __init__(self, fc=2.4e9, lx=0.5, ly=0.5, power=1.0, noise_power=None, order=30,
                 max_iters=200, rel_tol=1e-4, init="matched-filter", coupling=True,
                 random_state=None):
        self.fc = fc
        self.lx = lx
        self.ly = ly
        self.power = power
        self.noise_power = noise_power
        self.order = order
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.init = init
        self.coupling = coupling
        self.random_state = random_state

    def _calibrate(self, X, medium, grid, approx, power_medium):
        one = UserScene(X.mean(axis=0, keepdims=True), 1.0)
        h = channel_matrix(one, grid, medium)
        w = scale_full_power(h.conj().T, approx, grid, power_medium, self.power)
        return float(abs(effective_gains(h, grid, w)[0, 0]) ** 2 / _CALIBRATION_SNR)

    def fit(self, X, y=None):
        X = _check_positions(X)
        medium = self._medium()
        aperture = Aperture(self.lx, self.ly)
        cfg = self._solver_config()
        if self.coupling:
            approx = build_kernel_approx(medium, aperture, gauss_legendre(self.order))
            power_medium = medium
        else:
            approx = uncoupled_kernel(build_aperture_grid(aperture, gauss_legendre(self.order)))
            power_medium = dataclasses.replace(medium, zs=1.0)
        grid = approx.grid
        noise = self.noise_power
        if noise is None:
            noise = self._calibrate(X, medium, grid, approx, power_medium)
        scene = UserScene(X, noise)
        h = channel_matrix(scene, grid, medium)
        res = solve_channel(h, scene.noise_powers, grid, approx, power_medium, self.power, cfg)
        self.weights_ = res.w
        self.sum_rate_ = res.sum_rate
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.trace_ = res.trace
        self.noise_power_ = float(noise)
        self.grid_ = grid
        self.medium_ = medium
        self.n_users_ = X.shape[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = _check_positions(X, self.n_users_)
        h = channel_matrix(UserScene(X, self.noise_power_), self.grid_, self.medium_)
        return _per_user_rates(effective_gains(h, self.grid_, self.weights_), self.noise_power_)


class SpdaBeamformer(_BaseBeamformer):
    """WMMSE beamformer for a discrete array with pitch ``wavelength / spacing_fraction``.

    ``noise_power`` is required here (no calibration).
    """

    def __init__(self, fc=2.4e9, lx=0.5, ly=0.5, power=1.0, noise_power=1e-2,
                 spacing_fraction=2, coupling=True, order=30, max_iters=200, rel_tol=1e-4,
                 init="matched-filter", random_state=None):
        self.fc = fc
        self.lx = lx
        self.ly = ly
        self.power = power
        self.noise_power = noise_power
        self.spacing_fraction = spacing_fraction
        self.coupling = coupling
        self.order = order
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = _check_positions(X)
        medium = self._medium()
        if not self.spacing_fraction > 0:
            raise InvalidParameterError("spacing_fraction must be positive")
        arr = spda_array(Aperture(self.lx, self.ly), medium.wavelength / self.spacing_fraction,
                         "sampled-kernel" if self.coupling else "none")
        scene = UserScene(X, self.noise_power)
        res = spda_solve(arr, scene, medium, self.power, self._solver_config())
        self.weights_ = res.w
        self.sum_rate_ = res.sum_rate
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.array_ = arr
        self.medium_ = medium
        self.n_users_ = X.shape[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = _check_positions(X, self.n_users_)
        h = spda_channel(self.array_, UserScene(X, self.noise_power), self.medium_)
        return _per_user_rates(h @ self.weights_, self.noise_power)


class MimoBeamformer(_BaseBeamformer):
    """CAPA-to-CAPA MIMO precoder.

    ``fit(X)`` takes the receive-aperture center as a single row (1, 3).
    ``predict`` returns per-eigenmode rates ``log2(1 + lambda_i)`` of
    ``gram / sigma^2``; they sum to the achievable rate.
    """

    def __init__(self, fc=2.4e9, lx=0.5, ly=0.5, rx_lx=0.5, rx_ly=0.5, n_streams=4,
                 power=1.0, noise_power=None, order=30, rx_order=None, max_iters=200,
                 rel_tol=1e-4, init="matched-filter", random_state=None):
        self.fc = fc
        self.lx = lx
        self.ly = ly
        self.rx_lx = rx_lx
        self.rx_ly = rx_ly
        self.n_streams = n_streams
        self.power = power
        self.noise_power = noise_power
        self.order = order
        self.rx_order = rx_order
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.init = init
        self.random_state = random_state

    def _rx(self, X):
        X = _check_positions(X)
        if X.shape[0] != 1:
            raise DimensionError("MIMO expects a single receive-aperture center")
        return Aperture(self.rx_lx, self.rx_ly, tuple(X[0]))

    def fit(self, X, y=None):
        rx = self._rx(X)
        medium = self._medium()
        tx = Aperture(self.lx, self.ly)
        cfg = self._solver_config()
        approx = build_kernel_approx(medium, tx, gauss_legendre(self.order))
        rx_grid = build_aperture_grid(rx, gauss_legendre(self.rx_order or self.order))
        noise = self.noise_power
        if noise is None:
            h = cross_channel_matrix(rx_grid, approx.grid, medium)
            noise = calibrate_mimo_noise(h, approx.grid, rx_grid, approx, medium, self.power)
        scene = MimoScene(tx, rx, self.n_streams, noise, self.power, self.rx_order)
        res = solve_mimo(scene, medium, cfg, approx=approx)
        self.weights_ = res.w
        self.rate_ = res.rate
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.rate_trace_ = res.rate_trace
        self.noise_power_ = float(noise)
        self.approx_ = approx
        self.medium_ = medium
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        rx = self._rx(X)
        rx_grid = build_aperture_grid(rx, gauss_legendre(self.rx_order or self.order))
        h = cross_channel_matrix(rx_grid, self.approx_.grid, self.medium_)
        gram = mimo_gram(self.weights_, h, self.approx_.grid, rx_grid)
        lam = np.clip(np.linalg.eigvalsh(gram), 0.0, None) / self.noise_power_
        return np.log2(1.0 + lam[::-1])


__all__ = ["CapaBeamformer", "SpdaBeamformer", "MimoBeamformer"]
