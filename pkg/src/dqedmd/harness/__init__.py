"""Experiment configuration, Monte-Carlo sweeps and result files."""

from .config import (ConfigError, ExperimentConfig, bundled_config, config_from_dict,
                     load_config)
from .experiments import (format_report, prepare, result_metadata, run_recovery,
                          run_sweep, summarize)
from .io import (RESULT_COLUMNS, ResultRecord, read_metadata, read_results,
                 read_trajectories, write_results, write_trajectories)

__all__ = [
    "ConfigError", "ExperimentConfig", "bundled_config", "config_from_dict",
    "load_config",
    "format_report", "prepare", "result_metadata", "run_recovery", "run_sweep",
    "summarize",
    "RESULT_COLUMNS", "ResultRecord", "read_metadata", "read_results",
    "read_trajectories", "write_results", "write_trajectories",
]
