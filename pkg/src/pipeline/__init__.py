"""Experiment commands."""

from .commands import (
    RunContext,
    cmd_all,
    cmd_calibrate,
    cmd_gen,
    cmd_report,
    cmd_sweep,
    cmd_train,
)

__all__ = [
    "RunContext",
    "cmd_all",
    "cmd_calibrate",
    "cmd_gen",
    "cmd_report",
    "cmd_sweep",
    "cmd_train",
]
