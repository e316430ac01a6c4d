"""Kernel-approximation WMMSE beamforming for the multi-user downlink.

Beamformers are represented by their samples on the aperture grid, one
column per user (``W`` is ``I x K``). Every surface integral is the grid
quadrature, and the coupling kernel acts through its plane-wave
expansion, so one iteration costs ``O(K I^2)``. The ``I^3`` factorization
of ``D`` is done once when the kernel is built.

Rates are carried in nats internally and reported in bits.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .coupling import apply_kernel, em_power, projections
from .em import channel_response
from .exceptions import (DegenerateError, DimensionError, IllConditionedError,
                         InvalidParameterError)

MAX_CONDITION = 1e12
INIT_MODES = ("matched-filter", "random")


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls. ``order`` is the Gauss-Legendre order M."""

    max_iters: int = 200
    rel_tol: float = 1e-4
    init: str = "matched-filter"
    order: int = 30
    seed: int = 0
    node_map: str = "arcsine"

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise InvalidParameterError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidParameterError("rel_tol must be positive")
        if self.init not in INIT_MODES:
            raise InvalidParameterError(f"init must be one of {INIT_MODES}, got {self.init!r}")


@dataclass
class WmmseState:
    w: np.ndarray
    v: np.ndarray
    mu: np.ndarray
    beta: float
    effective_gains: np.ndarray
    noise_eq: np.ndarray
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class IterationRecord:
    """One WMMSE iteration.

    ``sum_rate`` and ``sum_log_mu`` (bits) are evaluated at the receiver
    update, i.e. for the beamformer entering the iteration; ``surrogate``
    (nats) is evaluated right after the beamformer update.
    """

    iteration: int
    sum_rate: float
    sum_log_mu: float
    surrogate: float


@dataclass
class WmmseResult:
    w: np.ndarray
    state: WmmseState
    trace: list
    converged: bool
    n_iter: int
    sum_rate: float
    power: float


def channel_matrix(scene, grid, medium):
    """``H[k, i] = h_k(s_i)`` for every user and grid point."""
    diff = scene.positions[:, None, :] - grid.points[None, :, :]
    return channel_response(medium, diff, np.zeros(3))


def effective_gains(h, grid, w):
    """``E = H Phi W``; entry (k, i) is the gain of stream i at user k."""
    h = np.asarray(h)
    w = np.asarray(w)
    if h.shape[1] != grid.size or w.shape[0] != grid.size:
        raise DimensionError(f"shapes {h.shape} and {w.shape} do not match grid size {grid.size}")
    return (h * grid.phi_weights[None, :]) @ w


def equivalent_noise(w, grid, approx, noise_powers, power, medium):
    """Noise scaled by the coupled transmit power, ``sigma_k^2 P_em(W) / P_T``."""
    if not power > 0:
        raise InvalidParameterError("transmit power must be positive")
    p = em_power(w, grid, approx, medium)
    if p <= 0:
        raise DegenerateError("beamformer has zero transmit power")
    return np.asarray(noise_powers, dtype=float) * p / power


def update_receivers(e, noise_eq):
    """MMSE receivers and MSE weights ``mu_k = 1 / eps_k``."""
    e = np.asarray(e)
    total = np.sum(np.abs(e) ** 2, axis=1) + noise_eq
    diag = np.diagonal(e)
    v = diag / total
    mmse = 1.0 - np.abs(diag) ** 2 / total
    return v, 1.0 / mmse


def mse(e, v, noise_eq):
    """Per-user MSE for arbitrary receivers."""
    e = np.asarray(e)
    diag = np.diagonal(e)
    return (np.abs(v) ** 2 * (np.sum(np.abs(e) ** 2, axis=1) + noise_eq)
            + 1.0 - 2.0 * np.real(np.conj(v) * diag))


def compute_beta(v, mu, noise_powers, power):
    inv_beta = np.sum(mu * np.asarray(noise_powers) * np.abs(v) ** 2) / (2.0 * power)
    if inv_beta <= 0:
        raise DegenerateError("all receivers are zero")
    return 1.0 / inv_beta


def gtilde_from_g(g, approx, grid, medium):
    """``Gamma`` (inverse-kernel image of g on the grid) and ``G~ = int g^H Gamma``.

    ``g`` holds the samples of g(s), one column per stream.
    """
    g = np.asarray(g)
    if g.shape[0] != grid.size:
        raise DimensionError(f"g must have {grid.size} rows, got {g.shape[0]}")
    gram = g.conj().T @ (grid.phi_weights[:, None] * g)
    a = projections(approx, g)
    b = approx.d @ (approx.lambda_diag[:, None] * a)
    gamma = (g - approx.x.conj().T @ b) / medium.zs
    gt = (gram - a.conj().T @ b) / medium.zs
    return gamma, gt


def build_gtilde(h, v, approx, grid, medium):
    """Closed-form matrices of the beamformer update for the receivers ``v``.

    ``g = H^H diag(v)``; returns ``Gamma = (1/Zs)(g - X^H B)`` and
    ``G~ = (1/Zs)(G - A^H D Lambda A)`` with ``A = X Phi g``, ``B = D Lambda A``.
    """
    v = np.asarray(v)
    g = np.asarray(h).conj().T * v[None, :]
    return gtilde_from_g(g, approx, grid, medium)


def _weight_matrix(mu):
    mu = np.asarray(mu)
    return np.diag(mu) if mu.ndim == 1 else mu


def beamformer_update(gamma, mu, gtilde, beta):
    """``W = Gamma U (I / beta + G~ U)^-1`` via a factorized solve."""
    u = _weight_matrix(mu)
    k = u.shape[0]
    m = np.eye(k) / beta + gtilde @ u
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(f"beamformer system is ill-conditioned (cond={cond:.3g})", cond)
    # W M = Gamma U  <=>  M^T W^T = (Gamma U)^T
    lu = scipy.linalg.lu_factor(m.T)
    return scipy.linalg.lu_solve(lu, (gamma @ u).T).T


def sum_rate(e, noise_eq, base=2.0):
    e = np.asarray(e)
    p = np.abs(e) ** 2
    sig = np.diagonal(p)
    interf = p.sum(axis=1) - sig
    return float(np.sum(np.log1p(sig / (interf + noise_eq))) / np.log(base))


def scale_full_power(w, approx, grid, medium, power):
    p = em_power(w, grid, approx, medium)
    if p <= 0:
        raise DegenerateError("cannot scale a zero beamformer")
    return w * np.sqrt(power / p)


def surrogate(w, v, mu, h, grid, approx, noise_powers, power, medium):
    """``sum_k (mu_k eps_k - log mu_k)`` in nats."""
    e = effective_gains(h, grid, w)
    s2 = np.asarray(noise_powers) * em_power(w, grid, approx, medium) / power
    return float(np.sum(mu * mse(e, v, s2) - np.log(mu)))


def stationarity_residual(state, h, approx, grid, medium):
    """Relative quadrature norm of the optimality residual ``p(s)``.

    ``p = g U int g^H w - g U + (1/beta) int c_T w`` with ``g = H^H diag(v)``;
    normalized by the norm of ``g U``.
    """
    g = np.asarray(h).conj().T * np.asarray(state.v)[None, :]
    return _stationarity(g, _weight_matrix(state.mu), state.beta, state.w, approx, grid, medium)


def _stationarity(g, u, beta, w, approx, grid, medium):
    phi = grid.phi_weights[:, None]
    gu = g @ u
    p = gu @ (g.conj().T @ (phi * w)) - gu + apply_kernel(approx, medium, w) / beta
    ref = np.sqrt(np.sum(phi * np.abs(gu) ** 2))
    return float(np.sqrt(np.sum(phi * np.abs(p) ** 2)) / ref)


def initial_beamformer(h, grid, approx, medium, power, config):
    if config.init == "matched-filter":
        w = np.asarray(h).conj().T.copy()
    else:
        rng = np.random.default_rng(config.seed)
        shape = (grid.size, np.asarray(h).shape[0])
        w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return scale_full_power(w, approx, grid, medium, power)


def run_wmmse(gains_of, power_of, gtilde_of, noise_powers, power, w0, config):
    """Generic WMMSE driver shared by the aperture and discrete-array solvers.

    Parameters
    ----------
    gains_of : callable
        ``W -> E`` (K x K effective gains).
    power_of : callable
        ``W -> P_em`` (watts).
    gtilde_of : callable
        ``v -> (Gamma, G~)`` for receivers ``v``.
    """
    noise_powers = np.asarray(noise_powers, dtype=float)
    w = w0
    trace = []
    converged = False
    prev_rate = None
    best = None
    state = None

    def receivers(w):
        e = gains_of(w)
        p = power_of(w)
        if p <= 0:
            raise DegenerateError("beamformer has zero transmit power")
        s2 = noise_powers * p / power
        return e, s2

    for it in range(1, int(config.max_iters) + 1):
        e, s2 = receivers(w)
        v, mu = update_receivers(e, s2)
        rate = sum_rate(e, s2)
        log_mu = float(np.sum(np.log(mu)) / np.log(2.0))
        if best is None or rate > best[0]:
            best = (rate, w)
        if prev_rate is not None and abs(rate - prev_rate) <= config.rel_tol * abs(rate):
            converged = True
            trace.append(IterationRecord(it, rate, log_mu, np.nan))
            break
        beta = compute_beta(v, mu, noise_powers, power)
        gamma, gt = gtilde_of(v)
        w_new = beamformer_update(gamma, mu, gt, beta)
        e_new, s2_new = receivers(w_new)
        lval = float(np.sum(mu * mse(e_new, v, s2_new) - np.log(mu)))
        trace.append(IterationRecord(it, rate, log_mu, lval))
        state = WmmseState(w=w_new, v=v, mu=mu, beta=beta, effective_gains=e, noise_eq=s2)
        # (cW, v/c) leaves rate and surrogate unchanged; renormalizing keeps
        # the iterate bounded when the update is inexact
        w = w_new * np.sqrt(np.sum(noise_powers) / np.sum(s2_new))
        prev_rate = rate

    if not converged:
        e, s2 = receivers(w)
        rate = sum_rate(e, s2)
        if rate >= best[0]:
            best = (rate, w)
    final_rate, w_best = best
    if state is None:
        e, s2 = receivers(w_best)
        v, mu = update_receivers(e, s2)
        state = WmmseState(w=w_best, v=v, mu=mu, beta=compute_beta(v, mu, noise_powers, power),
                           effective_gains=e, noise_eq=s2)
    state.trace = trace
    w_scaled = w_best * np.sqrt(power / power_of(w_best))
    return WmmseResult(w=w_scaled, state=state, trace=trace, converged=converged,
                       n_iter=len(trace), sum_rate=final_rate, power=power_of(w_scaled))


def solve_channel(h, noise_powers, grid, approx, medium, power, config=None, w0=None):
    """Run the WMMSE iterations for a given channel matrix ``h`` (K x I).

    Returns a :class:`WmmseResult` whose ``w`` meets the power budget with
    equality. ``state`` holds the last unscaled iterate with the receivers,
    weights and ``beta`` it was computed from.
    """
    config = config or SolverConfig()
    if not power > 0:
        raise InvalidParameterError("transmit power must be positive")
    h = np.asarray(h)
    noise_powers = np.broadcast_to(np.asarray(noise_powers, dtype=float), (h.shape[0],))
    if w0 is None:
        w0 = initial_beamformer(h, grid, approx, medium, power, config)
    return run_wmmse(
        gains_of=lambda w: effective_gains(h, grid, w),
        power_of=lambda w: em_power(w, grid, approx, medium),
        gtilde_of=lambda v: build_gtilde(h, v, approx, grid, medium),
        noise_powers=noise_powers, power=power, w0=w0, config=config)


def solve_multiuser(scene, aperture, medium, config=None, power=1.0, approx=None):
    """Sum-rate maximizing beamformer for ``scene`` under the coupled power budget."""
    from .coupling import build_kernel_approx
    from .quadrature import gauss_legendre

    config = config or SolverConfig()
    if approx is None:
        approx = build_kernel_approx(medium, aperture, gauss_legendre(config.order),
                                     node_map=config.node_map)
    grid = approx.grid
    h = channel_matrix(scene, grid, medium)
    return solve_channel(h, scene.noise_powers, grid, approx, medium, power, config)
