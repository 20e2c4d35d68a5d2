"""Aerial manipulator simulator, trainer, and evaluation harness."""

from ._core import (
    Env,
    Policy,
    Trainer,
    default_config_json,
    normalize_config_json,
    run_benchmark,
)

__all__ = [
    "Env",
    "Policy",
    "Trainer",
    "default_config_json",
    "normalize_config_json",
    "run_benchmark",
]
