"""Experiment orchestration: configuration, runs, sweeps, validation and plots."""
from .config import InitialSpec, KineticSpec, MetricSpec, RunConfig, load_config
from .plot import render
from .run import VERSION, fit_slope, run_single, run_sweep, validate

__all__ = ["RunConfig", "InitialSpec", "KineticSpec", "MetricSpec", "load_config",
           "run_single", "run_sweep", "validate", "fit_slope", "render", "VERSION"]
