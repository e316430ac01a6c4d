import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from capabf import CapaBeamformer, MimoBeamformer, SpdaBeamformer
from capabf.config import load_default_config
from capabf.exceptions import DimensionError, InvalidParameterError
from capabf.scenarios import generate_scene, solve_method

USERS = np.array([[30.0, -30.0, 50.0], [25.0, -35.0, 48.0], [38.0, -22.0, 50.0]])


def test_params_and_clone():
    est = CapaBeamformer(order=20, power=2.0)
    params = est.get_params()
    assert params["order"] == 20 and params["power"] == 2.0 and params["coupling"] is True
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(order=25)
    assert est.order == 25
    assert set(SpdaBeamformer().get_params()) >= {"spacing_fraction", "coupling", "noise_power"}
    assert set(MimoBeamformer().get_params()) >= {"n_streams", "rx_lx", "rx_order"}


def test_unfitted_predict_raises():
    for est in (CapaBeamformer(), SpdaBeamformer(), MimoBeamformer()):
        with pytest.raises(NotFittedError):
            est.predict(USERS[:1])


def test_input_validation():
    est = CapaBeamformer(order=12)
    with pytest.raises(DimensionError):
        est.fit(USERS[:, :2])
    with pytest.raises(ValueError):
        est.fit(np.array([[np.nan, 0.0, 1.0]]))
    with pytest.raises(InvalidParameterError):
        CapaBeamformer(fc=-1.0).fit(USERS)
    est.fit(USERS)
    with pytest.raises(DimensionError):
        est.predict(USERS[:2])
    with pytest.raises(DimensionError):
        MimoBeamformer(order=10).fit(USERS)


def test_capa_fit_predict_score():
    est = CapaBeamformer(order=20, noise_power=1e-2).fit(USERS.tolist())
    rates = est.predict(USERS)
    assert rates.shape == (3,) and np.all(rates > 0)
    assert est.score(USERS) == pytest.approx(est.sum_rate_, rel=1e-3)
    assert est.weights_.shape == (400, 3) and est.n_iter_ >= 1
    # weights serve these positions; swapping users breaks the stream assignment
    assert est.score(USERS[[1, 0, 2]]) < est.score(USERS)


def test_capa_matches_scenario_solver():
    cfg = load_default_config()
    scene = generate_scene(cfg, 0)
    est = CapaBeamformer(noise_power=cfg.noise_power).fit(scene.positions)
    rate, _ = solve_method(cfg, "capa-coupled", 0)
    assert est.sum_rate_ == pytest.approx(rate, rel=1e-12)


def test_capa_calibrated_noise():
    est = CapaBeamformer(order=30).fit(np.array([load_default_config().drop_center]))
    assert est.noise_power_ == pytest.approx(load_default_config().noise_power, rel=1e-9)
    # calibration uses the plain matched filter (20 dB); the coupling-aware design beats it
    assert est.predict(np.array([load_default_config().drop_center]))[0] > np.log2(101.0)


def test_capa_uncoupled_variant():
    est = CapaBeamformer(order=20, noise_power=1e-2, coupling=False).fit(USERS)
    assert np.isfinite(est.sum_rate_) and est.score(USERS) > 0


def test_spda_fit_predict_score():
    cfg = load_default_config()
    scene = generate_scene(cfg, 0)
    est = SpdaBeamformer(noise_power=cfg.noise_power, spacing_fraction=2).fit(scene.positions)
    rate, _ = solve_method(cfg, "spda-l2-coupled", 0)
    assert est.sum_rate_ == pytest.approx(rate, rel=1e-12)
    assert est.weights_.shape == (64, 4)
    assert est.score(scene.positions) == pytest.approx(rate, rel=1e-3)
    with pytest.raises(InvalidParameterError):
        SpdaBeamformer(spacing_fraction=0).fit(USERS)


def test_mimo_fit_predict_score():
    rx = np.array([[2.0, -2.0, 0.0]])
    est = MimoBeamformer(lx=0.25, ly=0.25, rx_lx=0.25, rx_ly=0.25, order=16, n_streams=2)
    est.fit(rx)
    modes = est.predict(rx)
    assert modes.shape == (2,)
    assert np.all(np.diff(modes) <= 1e-12) and np.all(modes >= 0)
    assert est.score(rx) == pytest.approx(est.rate_, rel=1e-8)
    far = est.score(np.array([[6.0, -6.0, 0.0]]))
    assert far < est.score(rx)
