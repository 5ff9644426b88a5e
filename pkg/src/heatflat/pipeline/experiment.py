"""Two-phase null-control experiment: zero flux on [0, tau], flat control on (tau, T].

The finite-difference simulation runs continuously over [0, T] from the
sampled initial state; it never restarts from the series, so it is an
independent check of the construction.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import ConfigError, HeatFlatError
from ..fdsolver import ControlSurface, Trajectory, simulate
from ..flatness import FlatController, fit_gevrey_envelope_traj
from ..grid import Field2D, Grid2D, l2_norm
from ..spectral import (
    PANELS_SMOOTH,
    NeumannBasis1D,
    cosine_x2,
    decompose,
    double_step,
    doublestep_matrix,
    evaluate_points,
    free_evolution,
    synthesize_field,
)
from . import io
from .config import ExperimentConfig, parse_initial_condition

log = logging.getLogger(__name__)


class InitialCondition:
    """Evaluator and grid sampler for a configured initial state."""

    def __init__(self, config: ExperimentConfig):
        self.source = parse_initial_condition(config.initial_condition)
        self.L = config.L
        self.basis = NeumannBasis1D(config.L)
        self._field = None
        if self.source.kind == "sampled_file":
            self._field = io.read_snapshot(self.source.path)
            if not np.isclose(self._field.grid.L, config.L):
                raise ConfigError(
                    f"sampled_file length {self._field.grid.L} does not match L={config.L}"
                )

    @property
    def smooth(self) -> bool:
        return self.source.kind in ("constant", "single_mode")

    def __call__(self, x1, x2):
        kind = self.source.kind
        if kind == "double_step":
            return double_step(x1, x2, self.L)
        if kind == "constant":
            return np.full(np.broadcast_shapes(np.shape(x1), np.shape(x2)), self.source.value)
        if kind == "single_mode":
            return self.basis.eigenfunction(self.source.j, x1) * cosine_x2(self.source.n, x2)
        g = self._field.grid
        interp = RegularGridInterpolator((g.x1, g.x2), self._field.values)
        x1, x2 = np.broadcast_arrays(x1, x2)
        return interp(np.stack([x1.ravel(), x2.ravel()], axis=1)).reshape(x1.shape)

    def coefficients(self, J: int, N: int, panels: int):
        if self._field is not None:
            return decompose(self._field, self.basis, J, N)
        return decompose(self, self.basis, J, N, PANELS_SMOOTH if self.smooth else panels)

    def sample(self, grid: Grid2D) -> Field2D:
        if self._field is not None and self._field.grid == grid:
            return Field2D(self._field.values.copy(), grid, 0.0)
        return Field2D.from_function(self, grid, 0.0)


@dataclass
class RunReport:
    config: dict
    snapshot_norms: list
    initial_norm: float
    final_norm: float
    final_relative_norm: float
    max_abs_control: float
    control_effort: float
    compatibility: dict
    phase_boundary_error: float
    gevrey: dict
    taylor_bound: dict
    tails: dict
    spectral: dict
    mass_balance: dict
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def numbers(self) -> dict:
        """Every reported value except wall-clock timings."""
        d = self.to_dict()
        d.pop("timings")
        return d


def _gevrey_dict(est) -> dict:
    return {
        "defined": est.defined,
        "M": est.M if est.defined else None,
        "R": est.R if est.defined else None,
        "M_envelope": est.M_envelope if est.defined else None,
        "max_residual": est.max_residual if est.defined else None,
        "rms_residual": est.rms_residual if est.defined else None,
        "n_samples": est.n_samples,
    }


def taylor_bound_summary(controller: FlatController) -> dict:
    """Fitted constant and growth slope of ``|y_{j,i}| tau^i / i!``."""
    tau = controller.tau
    ratio = controller.tau_coefficients().scaled_magnitudes()
    sup = float(ratio.max())
    per_order = ratio.max(axis=0)
    keep = per_order > 0
    slope = slope_err = None
    if keep.sum() >= 2:
        i = np.arange(per_order.size)[keep]
        A = np.column_stack([np.ones(i.size), i])
        coef, res, *_ = np.linalg.lstsq(A, np.log(per_order[keep]), rcond=None)
        slope = float(coef[1])
        resid = np.log(per_order[keep]) - A @ coef
        dof = max(i.size - 2, 1)
        cov = np.linalg.inv(A.T @ A) * float(resid @ resid) / dof
        slope_err = float(np.sqrt(cov[1, 1]))
    return {
        "sup_scaled": sup,
        "C": sup / (1.0 + tau**-0.5),
        "slope": slope,
        "slope_stderr": slope_err,
    }


def compatibility_residuals(controller: FlatController, n_probe: int = 21) -> dict:
    """Max-abs mismatch at ``tau`` between series and free evolution (k = 0, 1)."""
    basis = controller.basis
    x1 = np.linspace(0.0, basis.L, n_probe)
    x2 = np.linspace(0.0, 1.0, n_probe)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    out = {}
    for k in (0, 1):
        series = controller.time_derivative_series(controller.tau, X1, X2, k)
        oracle = evaluate_points(free_evolution(controller.coeffs, basis, controller.tau, k), basis, X1, X2)
        out[f"k{k}"] = float(np.max(np.abs(series - oracle)))
    return out


def sample_control(controller: FlatController, times, x1) -> ControlSurface:
    return ControlSurface(times, x1, np.stack([controller.control_profile(t, x1) for t in times]))


def build_controller(config: ExperimentConfig, coeffs=None):
    ic = InitialCondition(config)
    if coeffs is None:
        coeffs = ic.coefficients(config.J, config.N, config.quadrature_panels)
    return ic, coeffs, FlatController(coeffs, config.tau, config.T, config.s, config.I)


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Full pipeline: decompose, synthesize, simulate, report (and export)."""
    timings = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    ic = InitialCondition(config)
    basis = ic.basis
    coeffs = ic.coefficients(config.J, config.N, config.quadrature_panels)
    spectral = {"coefficient_norm_sq": float(np.sum(coeffs.c**2)), "closed_form_deviation": None}
    if ic.source.kind == "double_step":
        ref = doublestep_matrix(config.J, config.N, config.L)
        spectral["closed_form_deviation"] = float(np.max(np.abs(ref.c - coeffs.c)))
    lap("decompose")

    grid = Grid2D(config.L, config.n1, config.n2)
    theta_tau = synthesize_field(free_evolution(coeffs, basis, config.tau), basis, grid, config.tau)
    lap("free_evolution")

    controller = FlatController(coeffs, config.tau, config.T, config.s, config.I)
    compat = compatibility_residuals(controller, config.probe_points)
    sample_times = np.linspace(config.tau, config.T, config.envelope_samples)
    envelope = fit_gevrey_envelope_traj(controller.trajectory(sample_times))
    tails = controller.tail_magnitudes(sample_times)
    bound = taylor_bound_summary(controller)
    lap("synthesis")

    n_steps = round(config.T / config.dt)
    control_times = np.array([k * config.dt for k in range(n_steps + 1)])
    control_times[-1] = config.T
    control_times[np.isclose(control_times, config.tau, rtol=0, atol=1e-12)] = config.tau
    surface = sample_control(controller, control_times, grid.x1)
    lap("control_sampling")

    theta0 = ic.sample(grid)
    snap_times = sorted(set(config.snapshot_times) | {config.tau})
    traj: Trajectory = simulate(theta0, controller.control_profile, config.T, config.dt, snap_times)
    lap("simulation")

    init_norm = l2_norm(theta0)
    final_norm = l2_norm(traj.final)
    at_tau = traj.at(config.tau)
    diff = l2_norm(Field2D(at_tau.values - theta_tau.values, grid))
    ref_norm = l2_norm(theta_tau)
    phase_err = diff / ref_norm if ref_norm > 0 else diff
    heat0, heat1 = theta0.integral(), traj.final.integral()

    report = RunReport(
        config=config.to_dict(),
        snapshot_norms=[
            {"t": s.t, "l2": l2_norm(s)} for s in traj.snapshots if s.t in config.snapshot_times
        ],
        initial_norm=init_norm,
        final_norm=final_norm,
        final_relative_norm=final_norm / init_norm if init_norm > 0 else final_norm,
        max_abs_control=float(np.max(np.abs(surface.values))),
        control_effort=surface.l2_norm(),
        compatibility=compat,
        phase_boundary_error=phase_err,
        gevrey=_gevrey_dict(envelope),
        taylor_bound=bound,
        tails=tails,
        spectral=spectral,
        mass_balance={
            "initial_heat": heat0,
            "final_heat": heat1,
            "injected_heat": traj.heat_injected,
            "residual": heat1 - heat0 - traj.heat_injected,
        },
        timings=timings,
    )
    if config.output_dir is not None:
        export_run(config, report, traj, surface, coeffs)
        lap("export")
    return report


def export_snapshots(traj: Trajectory, out_dir, snapshot_times=None):
    out_dir = Path(out_dir) / "snapshots"
    paths = []
    snaps = [s for s in traj.snapshots if snapshot_times is None or s.t in snapshot_times]
    for k, snap in enumerate(snaps):
        paths.append(io.write_snapshot(snap, out_dir / io.snapshot_filename(k, snap.t)))
    return paths


def export_control(surface: ControlSurface, out_dir):
    return io.write_control(surface, Path(out_dir) / "control.csv")


def export_report(report: RunReport, out_dir):
    return io.write_json(report.to_dict(), Path(out_dir) / "report.json")


def read_report(path) -> RunReport:
    return RunReport.from_dict(io.read_json(path))


def export_run(config, report, traj, surface, coeffs):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.to_text())
    io.write_coefficients(coeffs, out / "coefficients.csv")
    export_snapshots(traj, out, config.snapshot_times)
    export_control(surface, out)
    export_report(report, out)


def _run_one(config):
    try:
        return run_experiment(config)
    except HeatFlatError as exc:
        return exc


def sweep_tau(config: ExperimentConfig, tau_values, workers: int = 1) -> list:
    """One run per ``tau``; invalid entries yield their error in place of a report.

    Each run writes to ``<output_dir>/tau_<tau>`` when an output directory is set.
    """
    configs = []
    for tau in tau_values:
        try:
            out = None
            if config.output_dir is not None:
                out = str(Path(config.output_dir) / f"tau_{float(tau):g}")
            configs.append(config.replace(tau=float(tau), output_dir=out))
        except ConfigError as exc:
            configs.append(exc)
    results = [None] * len(configs)
    todo = [(k, c) for k, c in enumerate(configs) if isinstance(c, ExperimentConfig)]
    for k, c in enumerate(configs):
        if not isinstance(c, ExperimentConfig):
            results[k] = c
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (k, _), res in zip(todo, pool.map(_run_one, [c for _, c in todo])):
                results[k] = res
    else:
        for k, c in todo:
            results[k] = _run_one(c)
    return results
