"""CAPA-to-CAPA MIMO: continuous receive filters and the adapted WMMSE loop.

The receive aperture has its own Gauss-Legendre grid (order ``M_R``, weights
``Phi_R``); received fields, field filters and their Gram matrices are all
carried as samples on that grid. Only the transmit side is subject to the
coupled power constraint.

Two Gram-type matrices appear and are kept apart by name: ``gram`` is the
N x N matrix ``int e_rx^H e_rx dr`` of received stream fields, while the
plane-wave Gram of the kernel expansion lives on ``KernelApprox.q``.
"""

from dataclasses import dataclass, field

import numpy as np

from .coupling import build_kernel_approx, em_power
from .em import Aperture, channel_response
from .exceptions import (DegenerateError, DimensionError, InvalidParameterError,
                         SingularityError)
from .quadrature import build_aperture_grid, gauss_legendre
from .wmmse import SolverConfig, _stationarity, beamformer_update, gtilde_from_g


@dataclass(frozen=True)
class MimoScene:
    """Parallel, unrotated transmit and receive apertures.

    Attributes
    ----------
    tx_aperture, rx_aperture : Aperture
    n_streams : int
    sigma_r2 : float
        Spatially white receive noise power.
    power : float
        Transmit power budget ``P_T`` (W).
    rx_order : int or None
        Receive quadrature order ``M_R``; ``None`` uses the transmit order.
    """

    tx_aperture: Aperture
    rx_aperture: Aperture
    n_streams: int
    sigma_r2: float
    power: float = 1.0
    rx_order: int = None

    def __post_init__(self):
        if int(self.n_streams) < 1:
            raise InvalidParameterError("n_streams must be >= 1")
        if not self.sigma_r2 > 0:
            raise InvalidParameterError("sigma_r2 must be positive")
        if not self.power > 0:
            raise InvalidParameterError("transmit power must be positive")
        _check_disjoint(self.tx_aperture, self.rx_aperture)


@dataclass
class MimoState:
    w: np.ndarray
    v_samples: np.ndarray
    u: np.ndarray
    beta: float
    trace: list = field(default_factory=list)


@dataclass
class MimoResult:
    w: np.ndarray
    state: MimoState
    rate_trace: list
    surrogate_trace: list
    converged: bool
    n_iter: int
    rate: float
    power: float


def _check_disjoint(tx, rx):
    tc, rc = np.asarray(tx.center), np.asarray(rx.center)
    if np.linalg.norm(tc - rc) == 0:
        raise SingularityError("transmit and receive apertures share a center")
    if tc[2] == rc[2]:
        # coplanar apertures must not overlap in x-y
        gap_x = abs(tc[0] - rc[0]) - 0.5 * (tx.lx + rx.lx)
        gap_y = abs(tc[1] - rc[1]) - 0.5 * (tx.ly + rx.ly)
        if gap_x < 0 and gap_y < 0:
            raise SingularityError("transmit and receive apertures overlap")


def rx_position(distance, direction=(1.0, -1.0, 0.0)):
    """Receive-aperture center at Euclidean ``distance`` from the origin along ``direction``."""
    d = np.asarray(direction, dtype=float)
    return tuple(float(x) for x in distance * d / np.linalg.norm(d))


def cross_channel_matrix(rx_grid, tx_grid, medium):
    """``H[j, i] = h(r_j - s_i)`` between receive and transmit grid points."""
    diff = rx_grid.points[:, None, :] - tx_grid.points[None, :, :]
    if np.any(np.linalg.norm(diff, axis=-1) == 0):
        raise SingularityError("transmit and receive grids share a point")
    return channel_response(medium, diff, np.zeros(3))


def received_fields(w, h_tr, tx_grid):
    """``E_rx = H_TR Phi_T W`` (I_R x N)."""
    w = np.asarray(w)
    if h_tr.shape[1] != tx_grid.size or w.shape[0] != tx_grid.size:
        raise DimensionError(f"shapes {h_tr.shape} and {w.shape} do not match the transmit grid")
    return (h_tr * tx_grid.phi_weights[None, :]) @ w


def mimo_gram(w, h_tr, tx_grid, rx_grid):
    """``int e_rx^H e_rx dr`` (N x N, Hermitian PSD)."""
    e = received_fields(w, h_tr, tx_grid)
    if e.shape[0] != rx_grid.size:
        raise DimensionError(f"channel has {e.shape[0]} rows, receive grid has {rx_grid.size}")
    gram = e.conj().T @ (rx_grid.phi_weights[:, None] * e)
    return 0.5 * (gram + gram.conj().T)


def mimo_rate(gram, sigma_eq2, base=2.0):
    """``log det(I + gram / sigma^2)``."""
    if not sigma_eq2 > 0:
        raise InvalidParameterError("noise power must be positive")
    gram = np.asarray(gram)
    n = gram.shape[0]
    sign, logdet = np.linalg.slogdet(np.eye(n) + gram / sigma_eq2)
    return float(logdet / np.log(base))


def mimo_mmse_filter(e_rx, gram, sigma_eq2):
    """Field filter samples ``v(r_j) = e_rx(r_j) / sigma^2 (I + gram / sigma^2)^-1``."""
    if not sigma_eq2 > 0:
        raise InvalidParameterError("noise power must be positive")
    n = gram.shape[0]
    a = np.eye(n) + np.asarray(gram) / sigma_eq2
    # v A = e / s2  <=>  A^T v^T = (e / s2)^T
    return np.linalg.solve(a.T, (np.asarray(e_rx) / sigma_eq2).T).T


def mse_matrix(w, v_samples, h_tr, tx_grid, rx_grid, approx, medium, sigma_r2, power):
    """``(I - M)(I - M)^H + sigma~^2 V`` with ``M = int v^H e_rx`` and ``V = int v^H v``."""
    e = received_fields(w, h_tr, tx_grid)
    v = np.asarray(v_samples)
    if v.shape != e.shape:
        raise DimensionError(f"filter shape {v.shape} does not match field shape {e.shape}")
    phi_r = rx_grid.phi_weights[:, None]
    n = e.shape[1]
    m = v.conj().T @ (phi_r * e)
    vg = v.conj().T @ (phi_r * v)
    p = em_power(w, tx_grid, approx, medium) if np.any(w) else 0.0
    a = np.eye(n) - m
    return a @ a.conj().T + sigma_r2 * p / power * vg


def init_streams(h_tr, tx_grid, rx_grid, n_streams):
    """Dominant right singular functions of the weighted cross channel."""
    st = np.sqrt(tx_grid.phi_weights)
    sr = np.sqrt(rx_grid.phi_weights)
    _, _, vh = np.linalg.svd(sr[:, None] * h_tr * st[None, :], full_matrices=False)
    return vh[:n_streams].conj().T / st[:, None]


def calibrate_mimo_noise(h_tr, tx_grid, rx_grid, approx, medium, power, snr_db=20.0):
    """Noise power giving ``snr_db`` on the strongest eigen-stream at full power."""
    w = init_streams(h_tr, tx_grid, rx_grid, 1)
    w = w * np.sqrt(power / em_power(w, tx_grid, approx, medium))
    gram = mimo_gram(w, h_tr, tx_grid, rx_grid)
    return float(np.real(gram[0, 0]) / 10.0 ** (snr_db / 10.0))


def mimo_stationarity(state, h_tr, tx_grid, rx_grid, approx, medium):
    g = h_tr.conj().T @ (rx_grid.phi_weights[:, None] * state.v_samples)
    return _stationarity(g, state.u, state.beta, state.w, approx, tx_grid, medium)


def solve_mimo(scene, medium, config=None, approx=None):
    """Rate-maximizing transmit currents for ``scene.n_streams`` streams.

    Returns a :class:`MimoResult`; ``rate_trace`` holds the rate (bits)
    entering each iteration and ``surrogate_trace`` the weighted-MSE
    objective ``tr(U E) - log det U`` right after each beamformer update.
    """
    config = config or SolverConfig()
    if approx is None:
        approx = build_kernel_approx(medium, scene.tx_aperture, gauss_legendre(config.order),
                                     node_map=config.node_map)
    tx_grid = approx.grid
    rx_grid = build_aperture_grid(scene.rx_aperture,
                                  gauss_legendre(scene.rx_order or config.order))
    h = cross_channel_matrix(rx_grid, tx_grid, medium)
    n = int(scene.n_streams)
    power = float(scene.power)
    phi_r = rx_grid.phi_weights[:, None]

    def power_of(w):
        p = em_power(w, tx_grid, approx, medium)
        if p <= 0:
            raise DegenerateError("beamformer has zero transmit power")
        return p

    if config.init == "matched-filter":
        w = init_streams(h, tx_grid, rx_grid, n)
    else:
        rng = np.random.default_rng(config.seed)
        w = rng.standard_normal((tx_grid.size, n)) + 1j * rng.standard_normal((tx_grid.size, n))
    w = w * np.sqrt(power / power_of(w))

    rates, surr = [], []
    best = None
    state = None
    converged = False
    for _ in range(int(config.max_iters)):
        s2 = scene.sigma_r2 * power_of(w) / power
        e = received_fields(w, h, tx_grid)
        gram = mimo_gram(w, h, tx_grid, rx_grid)
        rate = mimo_rate(gram, s2)
        rates.append(rate)
        if best is None or rate > best[0]:
            best = (rate, w)
        if len(rates) > 1 and abs(rate - rates[-2]) <= config.rel_tol * abs(rate):
            converged = True
            break
        v = mimo_mmse_filter(e, gram, s2)
        u = np.eye(n) + gram / s2
        u = 0.5 * (u + u.conj().T)
        vg = v.conj().T @ (phi_r * v)
        inv_beta = scene.sigma_r2 * float(np.real(np.trace(u @ vg))) / (2.0 * power)
        if inv_beta <= 0:
            raise DegenerateError("receive filter vanished")
        beta = 1.0 / inv_beta
        g = h.conj().T @ (phi_r * v)
        gamma, gt = gtilde_from_g(g, approx, tx_grid, medium)
        w_new = beamformer_update(gamma, u, gt, beta)
        emat = mse_matrix(w_new, v, h, tx_grid, rx_grid, approx, medium, scene.sigma_r2, power)
        surr.append(float(np.real(np.trace(u @ emat))) - np.linalg.slogdet(u)[1])
        state = MimoState(w=w_new, v_samples=v, u=u, beta=beta)
        # the rate is scale invariant; renormalizing keeps the iterate bounded
        w = w_new * np.sqrt(power / power_of(w_new))

    if not converged:
        s2 = scene.sigma_r2 * power_of(w) / power
        rate = mimo_rate(mimo_gram(w, h, tx_grid, rx_grid), s2)
        if rate >= best[0]:
            best = (rate, w)
    rate, w_best = best
    w_scaled = w_best * np.sqrt(power / power_of(w_best))
    if state is not None:
        state.trace = list(rates)
    return MimoResult(w=w_scaled, state=state, rate_trace=rates, surrogate_trace=surr,
                      converged=converged, n_iter=len(rates), rate=rate,
                      power=power_of(w_scaled))
