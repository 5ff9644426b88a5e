"""Experiment orchestration, file formats and the command-line interface."""

from .config import ExperimentConfig, parse_initial_condition
from .experiment import RunReport, read_report, run_experiment, sweep_tau

__all__ = ["ExperimentConfig", "RunReport", "parse_initial_condition", "read_report", "run_experiment", "sweep_tau"]
