"""Config-driven experiments, the Gaussian testbed and result tables."""
from .config import EstimatorSpec, ExperimentConfig, config_from_dict, load_config, read_config_file
from .experiment import ExperimentResults, TrialResult, aggregate_rows, run_experiment
from .tables import COLUMNS, FORMATS, emit_table, format_number, render_table
from .testbed import (GaussianTestbedConfig, GaussianTestbedResult, draw_estimates, gaussian_config_from_dict,
                      run_gaussian_testbed)

__all__ = [
    "COLUMNS", "FORMATS", "EstimatorSpec", "ExperimentConfig", "ExperimentResults", "GaussianTestbedConfig",
    "GaussianTestbedResult", "TrialResult", "aggregate_rows", "config_from_dict", "draw_estimates",
    "emit_table", "format_number", "gaussian_config_from_dict", "load_config", "read_config_file",
    "render_table", "run_experiment", "run_gaussian_testbed",
]
