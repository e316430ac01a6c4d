"""Command-line runner: ``capabf solve | sweep | validate``.

Exit codes: 0 success, 1 usage or config error, 2 solver failure,
3 validation failure.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import scenarios
from .baselines import capa_no_coupling_solve, spda_array, spda_solve
from .config import load_config, load_default_config, with_overrides
from .exceptions import CapaError, ConfigError, InvalidParameterError
from .mimo import MimoScene, cross_channel_matrix, mimo_stationarity, solve_mimo
from .quadrature import build_aperture_grid, gauss_legendre
from .wmmse import channel_matrix, solve_channel, stationarity_residual

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3
SWEEP_COLUMNS = ("axis", "value", "method", "mean_rate_bps", "stddev", "trials",
                 "converged_fraction")
TRACE_COLUMNS = ("iteration", "rate_bps", "sum_log_mu_bits", "surrogate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else "nan"
    return str(x)


def _json_float(x):
    return x if x is None or math.isfinite(x) else None


def build_parser():
    p = _Parser(prog="capabf", description="Coupling-aware CAPA beamforming simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file (default: bundled default.ini)")
        sp.add_argument("--out-dir", default=".", help="directory for result files")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--trials", type=int, help="override the number of trials")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")

    s = sub.add_parser("solve", help="solve one scenario")
    common(s)
    s.add_argument("--method", default="capa-coupled", choices=scenarios.METHODS)
    s.add_argument("--trial", type=int, default=0, help="trial index of the user drop")

    w = sub.add_parser("sweep", help="sweep one parameter axis")
    common(w)
    w.add_argument("--axis", required=True, choices=scenarios.SWEEP_AXES)
    w.add_argument("--values", required=True,
                   help="comma-separated values (power W, aperture m^2, frequency Hz, ...)")
    w.add_argument("--methods", help="comma-separated subset of methods")

    v = sub.add_parser("validate", help="run the oracle self-checks")
    v.add_argument("--config")
    v.add_argument("--fault", choices=["lambda-sign"], help=argparse.SUPPRESS)
    return p


def _load(args):
    cfg = load_config(args.config) if args.config else load_default_config()
    try:
        return with_overrides(cfg, seed=getattr(args, "seed", None),
                              trials=getattr(args, "trials", None))
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from exc


def _parse_values(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--values: {exc}") from exc
    if not vals:
        raise UsageError("--values must list at least one value")
    return vals


def solve_scenario(config, method="capa-coupled", trial=0):
    """Solve one scenario and return ``(summary dict, trace rows)``."""
    config = scenarios.resolve_noise(config)
    medium = config.medium
    solver = config.solver
    summary = {"method": method, "trial": trial, "seed": config.seed}
    if method == "mimo":
        approx = scenarios.kernel_for(config)
        scene = MimoScene(config.aperture, config.rx_aperture(), int(config.n_streams),
                          config.rx_noise_power, config.power, config.rx_order)
        res = solve_mimo(scene, medium, solver, approx=approx)
        rows = [(i + 1, r, None, s) for i, (r, s) in
                enumerate(zip(res.rate_trace, res.surrogate_trace + [None]))]
        rx_grid = build_aperture_grid(scene.rx_aperture,
                                      gauss_legendre(config.rx_order or config.order))
        h = cross_channel_matrix(rx_grid, approx.grid, medium)
        stat = (mimo_stationarity(res.state, h, approx.grid, rx_grid, approx, medium)
                if res.state is not None else None)
        summary.update(rate_bps=res.rate, noise_power=config.rx_noise_power,
                       n_streams=int(config.n_streams))
    else:
        scene = scenarios.generate_scene(config, trial)
        stat = None
        if method == "capa-coupled":
            approx = scenarios.kernel_for(config)
            h = channel_matrix(scene, approx.grid, medium)
            res = solve_channel(h, scene.noise_powers, approx.grid, approx, medium,
                                config.power, solver)
            stat = stationarity_residual(res.state, h, approx, approx.grid, medium)
        elif method == "capa-uncoupled":
            res = capa_no_coupling_solve(scene, config.aperture, medium, config.power, solver)
        else:
            frac, coupling = scenarios._parse_spda(method)
            arr = spda_array(config.aperture, medium.wavelength / frac, coupling)
            res = spda_solve(arr, scene, medium, config.power, solver)
        rows = [(r.iteration, r.sum_rate, r.sum_log_mu, r.surrogate) for r in res.trace]
        summary.update(rate_bps=res.sum_rate, noise_power=float(scene.noise_powers[0]),
                       users=scene.positions.tolist())
    summary.update(
        iterations=res.n_iter,
        converged=bool(res.converged),
        power_w=res.power,
        power_target_w=config.power,
        power_rel_error=abs(res.power - config.power) / config.power,
        stationarity_residual=stat,
    )
    return summary, rows


def write_trace(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRACE_COLUMNS)
        for row in rows:
            wr.writerow([_fmt(x) for x in row])


def write_sweep(path, axis, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SWEEP_COLUMNS)
        for value, s in rows:
            wr.writerow([axis, _fmt(float(value)), s.method, _fmt(s.mean), _fmt(s.stddev),
                         s.trials, _fmt(s.converged_fraction)])


_AXIS_LABELS = {
    "power": "Transmit power (W)",
    "aperture": "Aperture area (m^2)",
    "frequency": "Carrier frequency (Hz)",
    "gl_order": "Gauss-Legendre order M",
    "distance": "Tx-Rx distance (m)",
    "streams": "Number of streams N",
}


def plot_script(csv_name, axis):
    """Text of a standalone matplotlib script plotting a sweep CSV."""
    return f'''import csv
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(list)
with open({csv_name!r}, newline="") as fh:
    for row in csv.DictReader(fh):
        series[row["method"]].append((float(row["value"]), float(row["mean_rate_bps"]),
                                      float(row["stddev"])))

fig, ax = plt.subplots()
for method, pts in sorted(series.items()):
    pts.sort()
    x, y, e = zip(*pts)
    ax.errorbar(x, y, yerr=e, marker="o", capsize=3, label=method)
ax.set_xlabel({_AXIS_LABELS[axis]!r})
ax.set_ylabel("Sum-rate (bps/Hz)")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig({csv_name.rsplit(".", 1)[0] + ".png"!r}, dpi=150)
'''


def cmd_solve(args):
    cfg = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    with threadpool_limits(limits=1):
        try:
            summary, rows = solve_scenario(cfg, args.method, args.trial)
            summary["status"] = "ok"
        except (CapaError, np.linalg.LinAlgError) as exc:
            summary = {"method": args.method, "trial": args.trial, "status": "solver-failure",
                       "error": f"{type(exc).__name__}: {exc}"}
            rows = []
            status = EXIT_SOLVER
    summary = {k: (_json_float(v) if isinstance(v, float) else v) for k, v in summary.items()}
    with open(out / "result.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_trace(out / "trace.csv", rows)
    if status == EXIT_OK:
        print(f"{args.method}: rate {summary['rate_bps']:.4f} bits, "
              f"{summary['iterations']} iterations, converged={summary['converged']}")
    else:
        print(summary["error"], file=sys.stderr)
    return status


def cmd_sweep(args):
    cfg = _load(args)
    values = _parse_values(args.values)
    methods = None
    if args.methods:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        bad = [m for m in methods if m not in scenarios.METHODS]
        if bad:
            raise UsageError(f"unknown methods {bad}; choose from {scenarios.METHODS}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with threadpool_limits(limits=1):
        rows = scenarios.run_sweep(cfg, args.axis, values, methods, workers=args.threads)
    name = f"sweep_{args.axis}.csv"
    write_sweep(out / name, args.axis, rows)
    (out / f"plot_{args.axis}.py").write_text(plot_script(name, args.axis), encoding="utf-8")
    failed = [f for _, s in rows for f in s.failures]
    for _, s in rows:
        print(f"{s.method:<22s} mean {s.mean:9.4f}  std {s.stddev:8.4f}  "
              f"converged {s.converged_fraction:.2f}")
    if failed:
        for f in failed:
            print(f"failure: {f}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_validate(args):
    from .validate import format_report, run_checks

    cfg = load_config(args.config) if args.config else None
    with threadpool_limits(limits=1):
        results = run_checks(cfg, fault=args.fault)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_validate(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapaError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
