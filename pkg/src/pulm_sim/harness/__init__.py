"""Config parsing, experiment runner and CLI."""

from .config import ExperimentConfig, load_config, parse_config
from .runner import (Calibration, build_network, build_objective, calibrate_network,
                     certify_network, run_experiment)

__all__ = ["ExperimentConfig", "load_config", "parse_config", "Calibration", "build_network",
           "build_objective", "calibrate_network", "certify_network", "run_experiment"]
