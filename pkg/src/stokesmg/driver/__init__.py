"""Experiment configuration, orchestration and reporting."""

from .config import ExperimentConfig, ExperimentKind, build_config, load_config
from .experiments import (run, run_recovery, run_solve, run_spectrum,
                          run_timing, run_validate)

__all__ = ["ExperimentConfig", "ExperimentKind", "build_config", "load_config",
           "run", "run_recovery", "run_solve", "run_spectrum", "run_timing",
           "run_validate"]
