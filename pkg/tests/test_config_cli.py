import csv
import dataclasses
import json

import numpy as np
import pytest

from capabf import cli, scenarios
from capabf.config import (default_config_path, dump_config, load_config, load_default_config,
                           parse_config)
from capabf.exceptions import ConfigError, IllConditionedError

DEFAULT_TEXT = default_config_path().read_text(encoding="utf-8")


def _strip(text, key):
    return "\n".join(l for l in text.splitlines() if not l.strip().startswith(key))


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def quick_ini(tmp_path):
    """Default config cut down to 2 trials and a coarse grid."""
    cfg = dataclasses.replace(load_default_config(), trials=2, order=20)
    path = tmp_path / "quick.ini"
    path.write_text(dump_config(cfg))
    return path


def test_default_file_values():
    cfg = load_default_config()
    assert cfg.seed == 0 and cfg.trials == 10 and cfg.n_users == 4
    assert cfg.noise_power == 0.008752477420146959
    assert cfg.rx_noise_power == 0.019057436819636186
    assert cfg.node_map == "arcsine" and cfg.init == "matched-filter"


def test_repo_config_matches_bundled():
    from pathlib import Path
    repo = Path(__file__).resolve().parents[1] / "configs" / "default.ini"
    assert load_config(repo) == load_default_config()


def test_dump_parse_round_trip():
    cfg = load_default_config()
    assert parse_config(dump_config(cfg)) == cfg
    cal = dataclasses.replace(cfg, noise_power=None, rx_noise_power=None, rx_order=12)
    assert parse_config(dump_config(cal)) == cal


def test_missing_noise_power_names_field():
    with pytest.raises(ConfigError) as info:
        parse_config(_strip(DEFAULT_TEXT, "noise_power"))
    assert info.value.field == "noise_power" and "noise_power" in str(info.value)
    assert "calibrate_noise" in str(info.value)


def test_calibration_flag_makes_noise_optional():
    text = _strip(DEFAULT_TEXT, "noise_power").replace("calibrate_noise = false",
                                                       "calibrate_noise = true")
    assert parse_config(text).noise_power is None


def test_bad_value_reports_line():
    text = DEFAULT_TEXT.replace("order = 30", "order = thirty")
    line = next(i for i, l in enumerate(text.splitlines(), 1) if l.startswith("order"))
    with pytest.raises(ConfigError) as info:
        parse_config(text, source="x.ini")
    msg = str(info.value)
    assert "[solver] order" in msg and f"line {line}" in msg and "x.ini" in msg


def test_unknown_key_and_syntax_errors():
    with pytest.raises(ConfigError, match="unknown field"):
        parse_config(DEFAULT_TEXT + "\nbandwidth = 1e6\n")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("no section header\n")
    with pytest.raises(ConfigError, match="drop_center"):
        parse_config(DEFAULT_TEXT.replace("drop_center = 30, -30, 50", "drop_center = 30, -30"))
    with pytest.raises(ConfigError, match="invalid configuration"):
        parse_config(DEFAULT_TEXT.replace("trials = 10", "trials = 0"))


def test_usage_errors(tmp_path, capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE
    assert cli.main(["sweep", "--axis", "power", "--values", "",
                     "--out-dir", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["sweep", "--axis", "power", "--values", "1,x",
                     "--out-dir", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["sweep", "--axis", "power", "--values", "1", "--methods", "capa-magic",
                     "--out-dir", str(tmp_path)]) == cli.EXIT_USAGE
    assert cli.main(["solve", "--threads", "0", "--out-dir", str(tmp_path)]) == cli.EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(_strip(DEFAULT_TEXT, "noise_power"))
    assert cli.main(["solve", "--config", str(bad), "--out-dir", str(tmp_path)]) == 1
    assert "noise_power" in capsys.readouterr().err


def test_solve_writes_results(tmp_path, quick_ini):
    out = tmp_path / "run"
    assert cli.main(["solve", "--config", str(quick_ini), "--out-dir", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["status"] == "ok" and res["method"] == "capa-coupled"
    assert res["rate_bps"] > 0 and res["iterations"] >= 1
    assert res["power_rel_error"] <= 1e-10 and res["stationarity_residual"] < 1e-2
    rows = _read_csv(out / "trace.csv")
    assert list(rows[0]) == list(cli.TRACE_COLUMNS) and len(rows) == res["iterations"]
    assert float(rows[-1]["rate_bps"]) == pytest.approx(res["rate_bps"], rel=1e-3)


def test_solve_rerun_byte_identical(tmp_path, quick_ini):
    for d in ("a", "b"):
        assert cli.main(["solve", "--config", str(quick_ini), "--out-dir",
                         str(tmp_path / d), "--method", "spda-l4-coupled", "--trial", "2"]) == 0
    for name in ("result.json", "trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_overrides_and_mimo(tmp_path, quick_ini):
    assert cli.main(["solve", "--config", str(quick_ini), "--out-dir", str(tmp_path),
                     "--method", "mimo", "--seed", "4"]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["seed"] == 4 and res["n_streams"] == 4 and res["rate_bps"] > 0
    assert res["power_rel_error"] <= 1e-10


def test_solver_failure_exit(tmp_path, quick_ini, monkeypatch):
    def boom(*a, **k):
        raise IllConditionedError("singular system", condition=1e18)

    monkeypatch.setattr(cli, "solve_scenario", boom)
    code = cli.main(["solve", "--config", str(quick_ini), "--out-dir", str(tmp_path)])
    assert code == cli.EXIT_SOLVER
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["status"] == "solver-failure" and "IllConditionedError" in res["error"]


def test_sweep_outputs(tmp_path, quick_ini):
    args = ["sweep", "--config", str(quick_ini), "--axis", "power", "--values", "0.5,2",
            "--methods", "capa-coupled,spda-l2-coupled", "--out-dir", str(tmp_path)]
    assert cli.main(args) == 0
    with open(tmp_path / "sweep_power.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert set(header) >= {"axis", "method", "mean_rate_bps", "stddev", "trials",
                           "converged_fraction"}
    rows = _read_csv(tmp_path / "sweep_power.csv")
    assert [(r["value"], r["method"]) for r in rows] == [
        ("0.5", "capa-coupled"), ("0.5", "spda-l2-coupled"),
        ("2.0", "capa-coupled"), ("2.0", "spda-l2-coupled")]
    assert all(r["axis"] == "power" and r["trials"] == "2" for r in rows)
    script = (tmp_path / "plot_power.py").read_text()
    compile(script, "plot_power.py", "exec")
    assert "sweep_power.csv" in script and "Transmit power" in script


def test_sweep_failure_exit(tmp_path, quick_ini, monkeypatch):
    def flaky(config, method, trial):
        raise np.linalg.LinAlgError("injected")

    monkeypatch.setattr(scenarios, "solve_method", flaky)
    args = ["sweep", "--config", str(quick_ini), "--axis", "power", "--values", "1",
            "--methods", "spda-l2-coupled", "--out-dir", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_SOLVER
    (row,) = _read_csv(tmp_path / "sweep_power.csv")
    assert row["mean_rate_bps"] == "nan" and row["converged_fraction"] == "0.0"


def test_validate_passes(capsys):
    assert cli.main(["validate"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_validate_fault_fails(capsys):
    assert cli.main(["validate", "--fault", "lambda-sign"]) == cli.EXIT_VALIDATION
    assert "FAIL  inverse_identity" in capsys.readouterr().out


def _sweep_means(tmp_path, axis, values):
    assert cli.main(["sweep", "--axis", axis, "--values", values,
                     "--methods", ",".join(scenarios.MULTIUSER_METHODS),
                     "--out-dir", str(tmp_path)]) == 0
    means = {}
    for r in _read_csv(tmp_path / f"sweep_{axis}.csv"):
        means.setdefault(r["method"], []).append(float(r["mean_rate_bps"]))
    return means


@pytest.mark.slow
def test_power_sweep_increasing_per_method(tmp_path):
    for method, m in _sweep_means(tmp_path, "power", "0.5,1,2").items():
        assert np.all(np.diff(m) > 0), method


@pytest.mark.slow
def test_aperture_sweep_increasing_per_method(tmp_path):
    for method, m in _sweep_means(tmp_path, "aperture", "0.0625,0.25,1").items():
        assert np.all(np.diff(m) > 0), method
