"""Twin-experiment orchestration: generate / estimate / evaluate / mask / sweep."""

from kflow.pipeline.config import ConfigError, ExperimentConfig
from kflow.pipeline.experiment import (
    ErrorReport,
    build_model,
    cmd_estimate,
    cmd_evaluate,
    cmd_generate,
    cmd_mask,
)
from kflow.pipeline.sweep import cmd_sweep

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ErrorReport",
    "build_model",
    "cmd_generate",
    "cmd_estimate",
    "cmd_evaluate",
    "cmd_mask",
    "cmd_sweep",
]
