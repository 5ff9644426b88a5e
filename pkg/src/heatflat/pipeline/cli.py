"""Command-line interface.

    heatflat run --config exp.cfg --set tau=0.1
    heatflat sweep-tau --tau 0.025 0.05 0.1 --set output_dir=runs/sweep
    heatflat report runs/default/report.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import HeatFlatError
from ..fdsolver import simulate
from ..grid import Grid2D, l2_norm
from . import io
from .config import ExperimentConfig
from .experiment import (
    InitialCondition,
    build_controller,
    compatibility_residuals,
    export_control,
    export_snapshots,
    read_report,
    run_experiment,
    sample_control,
    sweep_tau,
)

log = logging.getLogger("heatflat")


def load_config(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_text("", overrides)


def _out_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir if config.output_dir is not None else ".")


def cmd_decompose(args):
    config = load_config(args)
    ic = InitialCondition(config)
    coeffs = ic.coefficients(config.J, config.N, config.quadrature_panels)
    path = io.write_coefficients(coeffs, _out_dir(config) / "coefficients.csv")
    print(f"coefficients ({coeffs.J + 1} x {coeffs.N + 1}) -> {path}")
    print(f"sum of squared coefficients: {np.sum(coeffs.c**2)!r}")


def cmd_synthesize(args):
    config = load_config(args)
    _, _, controller = build_controller(config)
    grid = Grid2D(config.L, config.n1, config.n2)
    n_steps = round(config.T / config.dt)
    times = np.array([k * config.dt for k in range(n_steps + 1)])
    times[-1] = config.T
    times[np.isclose(times, config.tau, rtol=0, atol=1e-12)] = config.tau
    surface = sample_control(controller, times, grid.x1)
    path = export_control(surface, _out_dir(config))
    compat = compatibility_residuals(controller, config.probe_points)
    print(f"control surface ({times.size} x {grid.n1}) -> {path}")
    print(f"compatibility at tau: k0={compat['k0']:.3e} k1={compat['k1']:.3e}")
    print(f"control effort: {surface.l2_norm()!r}")


def cmd_simulate(args):
    config = load_config(args)
    grid = Grid2D(config.L, config.n1, config.n2)
    theta0 = InitialCondition(config).sample(grid)
    control = io.read_control(args.control) if args.control else None
    traj = simulate(theta0, control, config.T, config.dt, config.snapshot_times)
    paths = export_snapshots(traj, _out_dir(config), config.snapshot_times)
    for snap in traj.snapshots:
        print(f"t={snap.t:.6f}  ||theta||={l2_norm(snap):.6e}")
    print(f"{len(paths)} snapshots -> {_out_dir(config) / 'snapshots'}")


def _summary(report) -> str:
    lines = [
        f"final relative L2 norm: {report.final_relative_norm:.3e}",
        f"initial / final L2 norm: {report.initial_norm:.6e} / {report.final_norm:.3e}",
        f"control effort: {report.control_effort:.6e}   max |u|: {report.max_abs_control:.6e}",
        f"compatibility at tau: k0={report.compatibility['k0']:.3e} k1={report.compatibility['k1']:.3e}",
        f"phase boundary mismatch: {report.phase_boundary_error:.3e}",
    ]
    if report.timings:
        lines.append("timings: " + ", ".join(f"{k}={v:.2f}s" for k, v in report.timings.items()))
    return "\n".join(lines)


def cmd_run(args):
    config = load_config(args)
    report = run_experiment(config)
    print(_summary(report))
    if config.output_dir is not None:
        print(f"outputs -> {config.output_dir}")


def cmd_sweep_tau(args):
    config = load_config(args)
    results = sweep_tau(config, args.tau, workers=args.workers)
    rows = []
    for tau, res in zip(args.tau, results):
        if isinstance(res, Exception):
            print(f"tau={tau:g}: error: {res}")
            rows.append({"tau": tau, "error": str(res)})
        else:
            print(
                f"tau={tau:g}: effort={res.control_effort:.6e} max|u|={res.max_abs_control:.6e} "
                f"final={res.final_relative_norm:.3e}"
            )
            rows.append(
                {
                    "tau": tau,
                    "control_effort": res.control_effort,
                    "max_abs_control": res.max_abs_control,
                    "final_relative_norm": res.final_relative_norm,
                }
            )
    if config.output_dir is not None:
        io.write_json({"sweep": rows}, Path(config.output_dir) / "sweep.json")
    return 1 if any("error" in r for r in rows) else 0


def cmd_report(args):
    report = read_report(args.path)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(_summary(report))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (key = value lines)")
    common.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="override a config value (repeatable)"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="heatflat", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common], help="cosine coefficients of the initial state")
    p.set_defaults(func=cmd_decompose)
    p = sub.add_parser("synthesize", parents=[common], help="sample the flat control surface")
    p.set_defaults(func=cmd_synthesize)
    p = sub.add_parser("simulate", parents=[common], help="finite-difference run with a given control")
    p.add_argument("--control", help="control surface CSV (t,x1,u); zero flux if omitted")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("run", parents=[common], help="full two-phase experiment")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep-tau", parents=[common], help="repeat the experiment for several tau")
    p.add_argument("--tau", type=float, nargs="+", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep_tau)
    p = sub.add_parser("report", help="summarize a report.json")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="print the full report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return args.func(args) or 0
    except HeatFlatError as exc:
        print(f"heatflat: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
