"""Scenario configuration, seeded user drops and Monte Carlo aggregation.

Every trial draws from its own generator keyed by ``(seed, trial_index)``,
so trials can run in any order or in parallel and still reproduce exactly.
"""

import dataclasses
import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .baselines import capa_no_coupling_solve, spda_array, spda_operator, spda_solve
from .coupling import build_kernel_approx
from .em import Aperture, UserScene, medium_from_config
from .exceptions import CapaError, InvalidParameterError
from .mimo import (MimoScene, calibrate_mimo_noise, cross_channel_matrix, rx_position,
                   solve_mimo)
from .quadrature import build_aperture_grid, gauss_legendre
from .wmmse import (SolverConfig, channel_matrix, effective_gains, scale_full_power,
                    solve_channel)

SPDA_FRACTIONS = (2, 4, 8)
METHODS = ("capa-coupled", "capa-uncoupled",
           *(f"spda-l{f}-{c}" for f in SPDA_FRACTIONS for c in ("coupled", "uncoupled")),
           "mimo")
MULTIUSER_METHODS = METHODS[:-1]
SWEEP_AXES = ("power", "aperture", "frequency", "gl_order", "distance", "streams")
CALIBRATION_SNR_DB = 20.0


@dataclass(frozen=True)
class ScenarioConfig:
    """All parameters of one simulated setup.

    Attributes
    ----------
    noise_power : float or None
        Per-user noise power (W). ``None`` means "calibrate": see
        :func:`calibrate_noise_power`.
    rx_noise_power : float or None
        Receive-aperture noise power for the MIMO setup; ``None`` calibrates.
    rx_distance : float
        Center distance (m) of the receive aperture, placed along (1, -1, 0).
    """

    seed: int = 0
    n_users: int = 4
    drop_center: tuple = (30.0, -30.0, 50.0)
    drop_radius: float = 15.0
    fc: float = 2.4e9
    lx: float = 0.5
    ly: float = 0.5
    power: float = 1.0
    noise_power: float = None
    trials: int = 10
    order: int = 30
    rx_order: int = None
    max_iters: int = 200
    rel_tol: float = 1e-4
    init: str = "matched-filter"
    node_map: str = "arcsine"
    n_streams: int = 4
    rx_distance: float = 10.0 * np.sqrt(2.0)
    rx_lx: float = 0.5
    rx_ly: float = 0.5
    rx_noise_power: float = None

    def __post_init__(self):
        object.__setattr__(self, "drop_center", tuple(float(c) for c in self.drop_center))
        if len(self.drop_center) != 3:
            raise InvalidParameterError("drop_center must have 3 coordinates")
        if int(self.trials) < 1:
            raise InvalidParameterError("trials must be >= 1")
        if int(self.n_users) < 1:
            raise InvalidParameterError("n_users must be >= 1")
        if self.drop_radius < 0:
            raise InvalidParameterError("drop_radius must be non-negative")
        for name in ("fc", "lx", "ly", "power", "rx_lx", "rx_ly", "rx_distance"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        for name in ("noise_power", "rx_noise_power"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise InvalidParameterError(f"{name} must be positive")

    @property
    def medium(self):
        return medium_from_config(self.fc)

    @property
    def aperture(self):
        return Aperture(self.lx, self.ly)

    @property
    def solver(self):
        return SolverConfig(max_iters=self.max_iters, rel_tol=self.rel_tol, init=self.init,
                            order=self.order, seed=self.seed, node_map=self.node_map)

    def rx_aperture(self):
        return Aperture(self.rx_lx, self.rx_ly, rx_position(self.rx_distance))


@dataclass(frozen=True)
class TrialSummary:
    """Aggregate of one (sweep point, method) cell."""

    method: str
    mean: float
    stddev: float
    trials: int
    converged_fraction: float
    failures: tuple = ()


def trial_rng(seed, trial_index):
    return np.random.default_rng([int(seed), int(trial_index)])


def sample_disc(rng, n, center, radius):
    """``n`` points uniform in the horizontal disc of ``radius`` around ``center``."""
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    c = np.asarray(center, dtype=float)
    return np.column_stack([c[0] + r * np.cos(theta), c[1] + r * np.sin(theta), np.full(n, c[2])])


def generate_scene(config, trial_index, noise_power=None):
    """User drop for one trial; ``noise_power`` overrides the config value."""
    noise = noise_power if noise_power is not None else config.noise_power
    if noise is None:
        noise = calibrate_noise_power(config)
    pos = sample_disc(trial_rng(config.seed, trial_index), config.n_users,
                      config.drop_center, config.drop_radius)
    return UserScene(pos, noise)


@functools.lru_cache(maxsize=8)
def _kernel(medium, aperture, order, node_map):
    return build_kernel_approx(medium, aperture, gauss_legendre(order), node_map=node_map)


@functools.lru_cache(maxsize=2)
def _spda(medium, aperture, fraction, coupling):
    arr = spda_array(aperture, medium.wavelength / fraction, coupling)
    return arr, spda_operator(arr, medium)


def kernel_for(config):
    return _kernel(config.medium, config.aperture, int(config.order), config.node_map)


def calibrate_noise_power(config, snr_db=CALIBRATION_SNR_DB):
    """Noise power giving a single user at the drop center ``snr_db`` matched-filter SNR.

    The matched filter is the conjugate channel scaled to the full coupled
    power budget.
    """
    medium = config.medium
    approx = kernel_for(config)
    grid = approx.grid
    one = UserScene(np.asarray([config.drop_center]), 1.0)
    h = channel_matrix(one, grid, medium)
    w = scale_full_power(h.conj().T, approx, grid, medium, config.power)
    gain = abs(effective_gains(h, grid, w)[0, 0]) ** 2
    return float(gain / 10.0 ** (snr_db / 10.0))


def calibrate_rx_noise_power(config, snr_db=CALIBRATION_SNR_DB):
    """Receive noise power giving the dominant eigen-stream ``snr_db`` at full power."""
    medium = config.medium
    approx = kernel_for(config)
    rx_grid = build_aperture_grid(config.rx_aperture(),
                                  gauss_legendre(config.rx_order or config.order))
    h = cross_channel_matrix(rx_grid, approx.grid, medium)
    return calibrate_mimo_noise(h, approx.grid, rx_grid, approx, medium, config.power, snr_db)


def resolve_noise(config):
    """Return ``config`` with both noise powers fixed (calibrating where unset)."""
    updates = {}
    if config.noise_power is None:
        updates["noise_power"] = calibrate_noise_power(config)
    if config.rx_noise_power is None:
        updates["rx_noise_power"] = calibrate_rx_noise_power(config)
    return dataclasses.replace(config, **updates) if updates else config


def _parse_spda(method):
    _, frac, coupling = method.split("-")
    return int(frac[1:]), ("sampled-kernel" if coupling == "coupled" else "none")


def solve_method(config, method, trial_index):
    """Run one method on one trial; returns ``(rate_bits, converged)``."""
    if method not in METHODS:
        raise InvalidParameterError(f"unknown method {method!r}; expected one of {METHODS}")
    medium = config.medium
    solver = config.solver
    if method == "mimo":
        if config.rx_noise_power is None:
            raise InvalidParameterError("rx_noise_power must be resolved before solving")
        scene = MimoScene(config.aperture, config.rx_aperture(), int(config.n_streams),
                          config.rx_noise_power, config.power, config.rx_order)
        res = solve_mimo(scene, medium, solver, approx=kernel_for(config))
        return res.rate, res.converged
    scene = generate_scene(config, trial_index)
    if method == "capa-coupled":
        approx = kernel_for(config)
        h = channel_matrix(scene, approx.grid, medium)
        res = solve_channel(h, scene.noise_powers, approx.grid, approx, medium, config.power,
                            solver)
    elif method == "capa-uncoupled":
        res = capa_no_coupling_solve(scene, config.aperture, medium, config.power, solver)
    else:
        frac, coupling = _parse_spda(method)
        arr, op = _spda(medium, config.aperture, frac, coupling)
        res = spda_solve(arr, scene, medium, config.power, solver, operator=op)
    return res.sum_rate, res.converged


def _run_task(task):
    config, method, trial = task
    with threadpool_limits(limits=1):
        try:
            rate, conv = solve_method(config, method, trial)
            return rate, conv, None
        except (CapaError, ValueError, np.linalg.LinAlgError) as exc:
            return float("nan"), False, f"trial {trial}: {type(exc).__name__}: {exc}"


def summarize(method, outcomes):
    """Mean/stddev over successful trials; failures are reported, not dropped silently.

    Rates are sorted before reduction so the result does not depend on
    trial order.
    """
    rates = np.sort(np.array([o[0] for o in outcomes if o[2] is None], dtype=float))
    failures = tuple(o[2] for o in outcomes if o[2] is not None)
    n = len(outcomes)
    if rates.size:
        mean = float(np.mean(rates))
        std = float(np.std(rates, ddof=1)) if rates.size > 1 else 0.0
    else:
        mean = std = float("nan")
    conv = sum(1 for o in outcomes if o[1]) / n
    return TrialSummary(method=method, mean=mean, stddev=std, trials=n,
                        converged_fraction=conv, failures=failures)


def map_tasks(tasks, workers=1):
    """Evaluate ``_run_task`` over ``tasks`` in input order, optionally in a process pool."""
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


def run_trials(config, methods=("capa-coupled",), workers=1):
    """Monte Carlo over ``config.trials`` drops for each method.

    Returns a list of :class:`TrialSummary`, one per method, in the given order.
    """
    config = resolve_noise(config)
    tasks = [(config, m, t) for m in methods for t in range(int(config.trials))]
    results = map_tasks(tasks, workers)
    out = []
    for i, m in enumerate(methods):
        chunk = results[i * config.trials:(i + 1) * config.trials]
        out.append(summarize(m, chunk))
    return out


def apply_axis(config, axis, value):
    """Config for one sweep point. Apertures are swept by area (square), frequency in Hz."""
    if axis == "power":
        return dataclasses.replace(config, power=float(value))
    if axis == "aperture":
        side = float(np.sqrt(value))
        return dataclasses.replace(config, lx=side, ly=side)
    if axis == "frequency":
        return dataclasses.replace(config, fc=float(value))
    if axis == "gl_order":
        if float(value) != int(value):
            raise InvalidParameterError(f"gl_order values must be integers, got {value}")
        return dataclasses.replace(config, order=int(value))
    if axis == "distance":
        return dataclasses.replace(config, rx_distance=float(value))
    if axis == "streams":
        if float(value) != int(value):
            raise InvalidParameterError(f"streams values must be integers, got {value}")
        return dataclasses.replace(config, n_streams=int(value))
    raise InvalidParameterError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def default_methods(axis):
    if axis in ("distance", "streams"):
        return ("mimo",)
    if axis == "gl_order":
        return ("capa-coupled", "mimo")
    return METHODS


def run_sweep(config, axis, values, methods=None, workers=1):
    """Sweep one axis; noise powers are fixed from the base config before sweeping.

    Returns ``[(value, TrialSummary), ...]`` ordered by value then method.
    """
    if len(values) == 0:
        raise InvalidParameterError("sweep needs at least one value")
    methods = tuple(methods) if methods else default_methods(axis)
    base = resolve_noise(config)
    points = [apply_axis(base, axis, v) for v in values]
    tasks = []
    for cfg in points:
        for m in methods:
            n = 1 if m == "mimo" else int(cfg.trials)
            tasks.extend((cfg, m, t) for t in range(n))
    results = map_tasks(tasks, workers)
    rows = []
    pos = 0
    for v, cfg in zip(values, points):
        for m in methods:
            n = 1 if m == "mimo" else int(cfg.trials)
            rows.append((v, summarize(m, results[pos:pos + n])))
            pos += n
    return rows
