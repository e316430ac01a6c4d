import dataclasses

import numpy as np
import pytest
from scipy import stats

from capabf import scenarios
from capabf.config import load_default_config
from capabf.exceptions import InvalidParameterError
from capabf.scenarios import (ScenarioConfig, apply_axis, calibrate_noise_power,
                              calibrate_rx_noise_power, generate_scene, map_tasks, run_sweep,
                              run_trials, summarize)


@pytest.fixture(scope="module")
def cfg():
    return load_default_config()


def test_config_defaults(cfg):
    assert cfg.n_users == 4 and cfg.drop_center == (30.0, -30.0, 50.0)
    assert cfg.drop_radius == 15.0 and cfg.fc == 2.4e9 and cfg.power == 1.0
    assert cfg.lx * cfg.ly == pytest.approx(0.25) and cfg.order == 30


@pytest.mark.parametrize("bad", [dict(trials=0), dict(drop_radius=-1.0), dict(fc=0.0),
                                 dict(lx=-0.5), dict(power=0.0), dict(noise_power=-1.0),
                                 dict(n_users=0), dict(drop_center=(1.0, 2.0))])
def test_config_invariants(bad):
    with pytest.raises(InvalidParameterError):
        ScenarioConfig(**bad)


def test_zero_radius_puts_users_at_center(cfg):
    scene = generate_scene(dataclasses.replace(cfg, drop_radius=0.0), 3)
    assert np.array_equal(scene.positions, np.tile(cfg.drop_center, (cfg.n_users, 1)))


def test_scene_deterministic(cfg):
    a = generate_scene(cfg, 5)
    b = generate_scene(cfg, 5)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.noise_powers, b.noise_powers)
    assert not np.array_equal(a.positions, generate_scene(cfg, 6).positions)
    assert not np.array_equal(a.positions,
                              generate_scene(dataclasses.replace(cfg, seed=1), 5).positions)


def test_scene_in_disc_plane(cfg):
    for t in range(5):
        pos = generate_scene(cfg, t).positions
        assert pos.shape == (cfg.n_users, 3)
        assert np.all(pos[:, 2] == cfg.drop_center[2])
        r = np.hypot(pos[:, 0] - cfg.drop_center[0], pos[:, 1] - cfg.drop_center[1])
        assert np.all(r <= cfg.drop_radius)


def test_scene_noise_from_config(cfg):
    scene = generate_scene(cfg, 0)
    assert np.all(scene.noise_powers == cfg.noise_power)
    assert np.all(generate_scene(cfg, 0, noise_power=2.0).noise_powers == 2.0)


@pytest.fixture(scope="module")
def big_drop(cfg):
    return generate_scene(dataclasses.replace(cfg, n_users=10_000), 0).positions


def test_empirical_mean_near_center(big_drop, cfg):
    center = np.array(cfg.drop_center)
    assert np.all(np.abs(big_drop.mean(axis=0) - center) <= 0.01 * np.abs(center))


def test_radial_distribution_uniform_disc(big_drop, cfg):
    r2 = ((big_drop[:, 0] - cfg.drop_center[0]) ** 2
          + (big_drop[:, 1] - cfg.drop_center[1]) ** 2) / cfg.drop_radius ** 2
    assert stats.kstest(r2, "uniform").statistic < 0.02
    theta = np.arctan2(big_drop[:, 1] - cfg.drop_center[1], big_drop[:, 0] - cfg.drop_center[0])
    assert stats.kstest((theta + np.pi) / (2 * np.pi), "uniform").statistic < 0.02


def test_single_trial_summary(cfg):
    (s,) = run_trials(dataclasses.replace(cfg, trials=1), ("spda-l2-coupled",))
    rate, _ = scenarios.solve_method(cfg, "spda-l2-coupled", 0)
    assert s.trials == 1 and s.mean == rate and s.stddev == 0.0 and not s.failures


def test_summary_order_independent():
    rng = np.random.default_rng(0)
    outcomes = [(float(r), bool(c), None) for r, c in
                zip(rng.uniform(5, 20, 37), rng.uniform(size=37) > 0.3)]
    ref = summarize("m", outcomes)
    for _ in range(20):
        perm = [outcomes[i] for i in rng.permutation(len(outcomes))]
        assert summarize("m", perm) == ref
    assert ref.mean == pytest.approx(np.mean([o[0] for o in outcomes]), rel=1e-14)
    assert ref.stddev == pytest.approx(np.std([o[0] for o in outcomes], ddof=1), rel=1e-12)


def test_standard_error_halves_with_doubled_trials(cfg):
    se10, se20 = [], []
    for meta in range(30):
        c = dataclasses.replace(cfg, seed=1000 + meta)
        out = map_tasks([(c, "spda-l2-coupled", t) for t in range(20)])
        s10 = summarize("m", out[:10])
        s20 = summarize("m", out)
        se10.append(s10.stddev / np.sqrt(10))
        se20.append(s20.stddev / np.sqrt(20))
    ratio = np.mean(se20) / np.mean(se10)
    assert 0.6 <= ratio <= 0.85


def test_workers_do_not_change_results(cfg):
    c = dataclasses.replace(cfg, trials=3)
    methods = ("capa-coupled", "spda-l2-coupled")
    assert run_trials(c, methods, workers=1) == run_trials(c, methods, workers=2)


def test_trial_failures_recorded(cfg, monkeypatch):
    real = scenarios.solve_method

    def flaky(config, method, trial):
        if trial == 1:
            raise np.linalg.LinAlgError("injected")
        return real(config, method, trial)

    monkeypatch.setattr(scenarios, "solve_method", flaky)
    (s,) = run_trials(dataclasses.replace(cfg, trials=3), ("spda-l2-coupled",))
    assert s.trials == 3 and len(s.failures) == 1 and "trial 1" in s.failures[0]
    assert np.isfinite(s.mean) and s.converged_fraction <= 2 / 3


def test_all_trials_failing_gives_nan():
    s = summarize("m", [(float("nan"), False, "boom")] * 2)
    assert np.isnan(s.mean) and np.isnan(s.stddev) and s.failures == ("boom", "boom")


def test_calibration_reproduces_default_file(cfg):
    assert calibrate_noise_power(cfg) == pytest.approx(cfg.noise_power, rel=1e-9)
    assert calibrate_rx_noise_power(cfg) == pytest.approx(cfg.rx_noise_power, rel=1e-9)
    resolved = scenarios.resolve_noise(dataclasses.replace(cfg, noise_power=None))
    assert resolved.noise_power == pytest.approx(cfg.noise_power, rel=1e-9)


def test_calibration_scales_with_power(cfg):
    # matched-filter gain is linear in the transmit power
    c2 = dataclasses.replace(cfg, power=2.0)
    assert calibrate_noise_power(c2) == pytest.approx(2 * calibrate_noise_power(cfg), rel=1e-10)


def test_apply_axis(cfg):
    assert apply_axis(cfg, "power", 2).power == 2.0
    ap = apply_axis(cfg, "aperture", 1.0)
    assert ap.lx == ap.ly == 1.0
    assert apply_axis(cfg, "frequency", 5e9).fc == 5e9
    assert apply_axis(cfg, "gl_order", 20.0).order == 20
    assert apply_axis(cfg, "distance", 3.0).rx_distance == 3.0
    assert apply_axis(cfg, "streams", 6).n_streams == 6
    with pytest.raises(InvalidParameterError):
        apply_axis(cfg, "gl_order", 20.5)
    with pytest.raises(InvalidParameterError):
        apply_axis(cfg, "bandwidth", 1.0)
    with pytest.raises(InvalidParameterError):
        run_sweep(cfg, "power", [])
    with pytest.raises(InvalidParameterError):
        scenarios.solve_method(cfg, "capa-magic", 0)


def test_sweep_keeps_base_noise(cfg):
    rows = run_sweep(dataclasses.replace(cfg, trials=2, noise_power=None), "power", [2.0],
                     ["spda-l2-coupled"])
    fixed = dataclasses.replace(cfg, trials=2, power=2.0)
    (ref,) = run_trials(fixed, ("spda-l2-coupled",))
    assert rows[0][1].mean == pytest.approx(ref.mean, rel=1e-9)


def test_gl_order_sweep_converges(cfg):
    orders = [10, 15, 20, 25, 30, 35]
    rows = run_sweep(dataclasses.replace(cfg, trials=3), "gl_order", orders, ["capa-coupled"])
    rates = np.array([s.mean for _, s in rows])
    assert all(not s.failures for _, s in rows)
    gaps = np.abs(rates - rates[-1])
    assert np.all(np.diff(gaps) <= 0)
    assert gaps[-2] < 1e-3 * rates[-1]
