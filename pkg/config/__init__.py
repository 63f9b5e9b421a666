"""Configuration module."""

from .settings import (
    ExperimentConfig,
    Settings,
    echo_config,
    get_settings,
    load_config,
    parse_config,
)

__all__ = [
    "ExperimentConfig",
    "Settings",
    "echo_config",
    "get_settings",
    "load_config",
    "parse_config",
]
