"""Experiment runner: table sweeps, rate studies and the ``bench`` CLI."""
from .config import ConfigError, ExperimentConfig, Sweep, load_config
from .runner import ExperimentRecord, TableResult, emit_curves, run_rate_study, run_table
