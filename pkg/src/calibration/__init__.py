"""Calibration metrics and temperature scaling."""

from .metrics import (
    BinningConfig,
    BinStats,
    PredictionSet,
    ReliabilityReport,
    ace,
    bin_predictions,
    derive_predictions,
    ece,
    mce,
    summarize,
)
from .scaling import (
    FitConfig,
    LogitMatrix,
    Temperature,
    fit_temperature,
    nll,
    scale_probabilities,
    softmax_with_temperature,
)

__all__ = [
    "BinningConfig",
    "BinStats",
    "FitConfig",
    "LogitMatrix",
    "PredictionSet",
    "ReliabilityReport",
    "Temperature",
    "ace",
    "bin_predictions",
    "derive_predictions",
    "ece",
    "fit_temperature",
    "mce",
    "nll",
    "scale_probabilities",
    "softmax_with_temperature",
    "summarize",
]
