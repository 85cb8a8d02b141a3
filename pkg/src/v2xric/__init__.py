"""Deterministic O-RAN V2X simulator: four xApps against their standard baselines."""

from .config import ConfigError, ExperimentConfig, parse_config
from .experiments import run_experiment
from .ric import InvariantViolation

__version__ = "0.1.0"

__all__ = ["ConfigError", "ExperimentConfig", "InvariantViolation", "parse_config", "run_experiment"]
