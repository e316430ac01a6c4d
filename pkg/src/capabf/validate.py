"""Self-checks behind ``capabf validate``.

Each check measures one quantity and compares it with a fixed threshold.
``fault`` lets tests inject a known defect to confirm a check can fail.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .coupling import (apply_inverse_kernel, apply_kernel, build_kernel_approx, d_residual,
                       kernel_approx_eval)
from .em import Aperture, UserScene, c_rad_analytic, medium_from_config
from .quadrature import gauss_legendre
from .wmmse import (SolverConfig, beamformer_update, build_gtilde, channel_matrix,
                    compute_beta, effective_gains, em_power, solve_channel,
                    stationarity_residual, update_receivers)

FAULTS = (None, "lambda-sign")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28s} {self.value:.3e}  (threshold {self.threshold:.1e}) {self.detail}"


def kernel_error_samples(medium, aperture, approx, n_pairs=200, seed=0):
    """Relative KA error at random difference vectors between aperture points."""
    rng = np.random.default_rng(seed)
    half = np.array([aperture.lx, aperture.ly]) / 2.0
    a = rng.uniform(-half, half, (n_pairs, 2))
    b = rng.uniform(-half, half, (n_pairs, 2))
    d = np.column_stack([a - b, np.zeros(n_pairs)])
    exact = c_rad_analytic(d, medium)
    return np.abs(kernel_approx_eval(approx, d) - exact) / np.abs(exact)


def smooth_test_functions(grid, n=4, seed=0):
    """Low-order random polynomials times a mild plane-wave phase, sampled on ``grid``."""
    rng = np.random.default_rng(seed)
    ap = grid.aperture
    x = (grid.points[:, 0] - ap.center[0]) / (ap.lx / 2.0)
    y = (grid.points[:, 1] - ap.center[1]) / (ap.ly / 2.0)
    cols = []
    for _ in range(n):
        c = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        poly = sum(c[i, j] * x ** i * y ** j for i in range(3) for j in range(3))
        cols.append(poly * np.exp(1j * rng.uniform(-2, 2) * (x + y)))
    return np.column_stack(cols)


def inverse_identity_error(approx, medium, samples):
    """Relative quadrature-L2 error of ``inverse(forward(f))`` against ``f``."""
    phi = approx.grid.phi_weights[:, None]
    back = apply_inverse_kernel(approx, medium, apply_kernel(approx, medium, samples))
    return float(np.sqrt(np.sum(phi * np.abs(back - samples) ** 2)
                         / np.sum(phi * np.abs(samples) ** 2)))


def gram_resolution(approx):
    """Relative mismatch between the closed-form plane-wave Gram and its grid quadrature.

    The closed-form inverse is exact for the discretized problem only when
    the grid resolves the plane-wave products; a large value means the
    quadrature order is too low for the aperture's electrical size.
    """
    qd = (approx.x * approx.grid.phi_weights[None, :]) @ approx.x.conj().T
    return float(np.linalg.norm(qd - approx.q) / np.linalg.norm(approx.q))


def nystrom_operator(grid, medium, kernel=None):
    """Dense discretization of ``f -> Zs f + int c_rad(s - z) f(z) dz``.

    ``kernel`` maps difference vectors to ``c_rad`` values; the analytic
    kernel is used when it is ``None``.
    """
    d = grid.points[:, None, :] - grid.points[None, :, :]
    vals = c_rad_analytic(d, medium) if kernel is None else kernel(d)
    return medium.zs * np.eye(grid.size) + vals * grid.phi_weights[None, :]


def fredholm_mismatch(approx, medium, h, noise_powers, power, w, kernel="approx"):
    """Closed-form beamformer update vs a dense solve of the optimality equation.

    The equation ``int c_T w + beta g U int g^H w = beta g U`` is discretized
    by Nystrom on the grid and solved directly. With ``kernel="approx"`` the
    radiated kernel is the plane-wave expansion evaluated pointwise (so only
    the closed-form inversion is under test); ``"analytic"`` uses the exact
    kernel and also folds in the expansion error.
    """
    grid = approx.grid
    e = effective_gains(h, grid, w)
    s2 = np.asarray(noise_powers) * em_power(w, grid, approx, medium) / power
    v, mu = update_receivers(e, s2)
    beta = compute_beta(v, mu, noise_powers, power)
    gamma, gt = build_gtilde(h, v, approx, grid, medium)
    w_closed = beamformer_update(gamma, mu, gt, beta)
    g = np.asarray(h).conj().T * v[None, :]
    u = np.diag(mu)
    if kernel == "approx":
        op = nystrom_operator(grid, medium, lambda d: kernel_approx_eval(approx, d))
    elif kernel == "analytic":
        op = nystrom_operator(grid, medium)
    else:
        raise ValueError(f"kernel must be 'approx' or 'analytic', got {kernel!r}")
    lhs = op + beta * (g @ u) @ (g.conj().T * grid.phi_weights[None, :])
    w_dense = np.linalg.solve(lhs, beta * g @ u)
    return float(np.linalg.norm(w_closed - w_dense) / np.linalg.norm(w_dense))


def _inject(approx, fault):
    if fault is None:
        return approx
    if fault == "lambda-sign":
        lam = -np.asarray(approx.lambda_diag)
        n = lam.shape[0]
        d = np.linalg.solve((np.eye(n) + lam[:, None] * approx.q).T, np.eye(n)).T
        return dataclasses.replace(approx, lambda_diag=lam, d=d)
    raise ValueError(f"unknown fault {fault!r}; expected one of {FAULTS}")


def run_checks(config=None, fault=None):
    """Run the oracle suite on ``config`` (default parameters when ``None``)."""
    from .config import load_default_config
    from .scenarios import generate_scene, resolve_noise

    config = resolve_noise(config or load_default_config())
    medium = medium_from_config(config.fc)
    aperture = Aperture(config.lx, config.ly)
    approx = _inject(build_kernel_approx(medium, aperture, gauss_legendre(config.order),
                                         node_map=config.node_map), fault)
    out = []

    med = float(np.median(kernel_error_samples(medium, aperture, approx)))
    out.append(CheckResult("kernel_approx_median_error", med < 1e-3, med, 1e-3))
    res = d_residual(approx)
    out.append(CheckResult("d_residual", res < 1e-10, res, 1e-10))
    gres = gram_resolution(approx)
    out.append(CheckResult("gram_resolution", gres < 1e-6, gres, 1e-6))
    inv = inverse_identity_error(approx, medium, smooth_test_functions(approx.grid))
    out.append(CheckResult("inverse_identity", inv < 1e-2, inv, 1e-2))

    # small aperture: the plane-wave Gram closed form equals its grid quadrature
    small_ap = Aperture(0.05, 0.05)
    small = _inject(build_kernel_approx(medium, small_ap, gauss_legendre(8)), fault)
    scene = UserScene(np.array([[3.0, -2.0, 4.0], [-2.0, 1.0, 5.0]]), 1e-3)
    h_small = channel_matrix(scene, small.grid, medium)
    fred = fredholm_mismatch(small, medium, h_small, scene.noise_powers, 1.0,
                             h_small.conj().T)
    out.append(CheckResult("fredholm_oracle", fred < 1e-6, fred, 1e-6))
    fine = _inject(build_kernel_approx(medium, small_ap, gauss_legendre(16)), fault)
    h_fine = channel_matrix(scene, fine.grid, medium)
    fred = fredholm_mismatch(fine, medium, h_fine, scene.noise_powers, 1.0, h_fine.conj().T,
                             kernel="analytic")
    out.append(CheckResult("fredholm_analytic_kernel", fred < 1e-6, fred, 1e-6))

    scene = generate_scene(config, 0)
    h = channel_matrix(scene, approx.grid, medium)
    solver = dataclasses.replace(SolverConfig(), max_iters=config.max_iters,
                                 rel_tol=min(config.rel_tol, 1e-6), order=config.order)
    result = solve_channel(h, scene.noise_powers, approx.grid, approx, medium, config.power,
                           solver)
    surr = np.array([r.surrogate for r in result.trace if np.isfinite(r.surrogate)])
    rise = float(np.max(np.diff(surr))) if surr.size > 1 else 0.0
    out.append(CheckResult("surrogate_monotone", rise <= 1e-9, max(rise, 0.0), 1e-9))
    perr = abs(result.power - config.power) / config.power
    out.append(CheckResult("power_equality", perr <= 1e-10, perr, 1e-10))
    stat = stationarity_residual(result.state, h, approx, approx.grid, medium)
    out.append(CheckResult("stationarity", stat < 1e-6, stat, 1e-6))
    return out


def format_report(results):
    lines = [r.line() for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
