"""Readers and writers for every on-disk artifact."""

from .artifacts import (
    EvaluationReport,
    load_checkpoint,
    read_json,
    read_report,
    read_temperature,
    require,
    save_checkpoint,
    write_json,
    write_run_info,
    write_temperature,
)
from .pgm import PgmFormatError, UnsupportedPgmError, read_pgm, write_pgm
from .tables import (
    read_logits,
    read_manifest,
    read_sweep,
    write_logits,
    write_manifest,
    write_reliability,
    write_sweep,
)

__all__ = [
    "EvaluationReport",
    "PgmFormatError",
    "UnsupportedPgmError",
    "load_checkpoint",
    "read_json",
    "read_logits",
    "read_manifest",
    "read_pgm",
    "read_report",
    "read_sweep",
    "read_temperature",
    "require",
    "save_checkpoint",
    "write_json",
    "write_logits",
    "write_manifest",
    "write_pgm",
    "write_reliability",
    "write_run_info",
    "write_sweep",
    "write_temperature",
]
