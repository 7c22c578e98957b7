"""Experiment orchestration: config parsing, power sweeps, figure data, CLI."""

from .config import ExperimentConfig, default_config, load_config, parse_config
from .figures import emit_figure_data
from .pipeline import ResultRow, SweepResult, run_sweep, write_rows

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "SweepResult",
    "default_config",
    "emit_figure_data",
    "load_config",
    "parse_config",
    "run_sweep",
    "write_rows",
]
