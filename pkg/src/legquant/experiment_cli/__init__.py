"""Config-driven experiments: run sweeps, write result tables and reports."""

from .config import ExperimentConfig, load_config, load_config_dict
from .runner import ResultRecord, ResultSet, emit_plot_data, run, write_results

__all__ = [
    "ExperimentConfig",
    "ResultRecord",
    "ResultSet",
    "emit_plot_data",
    "load_config",
    "load_config_dict",
    "run",
    "write_results",
]
