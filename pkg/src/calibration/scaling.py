"""Temperature scaling: tempered softmax, holdout NLL and the 1-D temperature fit."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from src.errors import InvalidInputError, NumericError

from .metrics import PredictionSet, derive_predictions
from .search import golden_section, grid_bracket

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LogitMatrix:
    """Unnormalized class scores with their true labels."""
    logits: np.ndarray
    labels: np.ndarray
    sample_ids: list[str]

    def __post_init__(self):
        if self.logits.ndim != 2:
            raise InvalidInputError(f"logits must be 2-D, got shape {self.logits.shape}")
        n, k = self.logits.shape
        if self.labels.shape != (n,) or len(self.sample_ids) != n:
            raise InvalidInputError("logits, labels and sample ids disagree on sample count")
        if not np.all(np.isfinite(self.logits)):
            raise InvalidInputError("logits must be finite")
        if n and (self.labels.min() < 0 or self.labels.max() >= k):
            raise InvalidInputError(f"labels must lie in [0, {k})")

    @classmethod
    def build(cls, logits, labels, sample_ids: list[str] | None = None) -> "LogitMatrix":
        z = np.asarray(logits, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        ids = [str(i) for i in range(len(y))] if sample_ids is None else list(sample_ids)
        return cls(logits=z, labels=y, sample_ids=ids)

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def k(self) -> int:
        return self.logits.shape[1]

    def scaled(self, c: float) -> "LogitMatrix":
        """Every logit multiplied by c."""
        return LogitMatrix(self.logits * c, self.labels, self.sample_ids)

    def take(self, indices) -> "LogitMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return LogitMatrix(self.logits[idx], self.labels[idx], [self.sample_ids[i] for i in idx])

    @classmethod
    def concat(cls, parts: list["LogitMatrix"]) -> "LogitMatrix":
        return cls(
            logits=np.concatenate([p.logits for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            sample_ids=[sid for p in parts for sid in p.sample_ids],
        )


@dataclass(frozen=True)
class Temperature:
    value: float = 1.0
    nll_at_fit: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0):
            raise InvalidInputError(f"temperature must be finite and > 0, got {self.value}")


@dataclass(frozen=True)
class FitConfig:
    log_t_lower: float = math.log(0.05)
    log_t_upper: float = math.log(20.0)
    tolerance: float = 1e-6
    max_iterations: int = 200
    grid_points: int = 64

    def __post_init__(self):
        if not self.log_t_lower < self.log_t_upper:
            raise InvalidInputError("log_t_lower must be < log_t_upper")
        if self.tolerance <= 0:
            raise InvalidInputError("tolerance must be > 0")


def _temperature_value(t: "Temperature | float") -> float:
    value = t.value if isinstance(t, Temperature) else float(t)
    if not (math.isfinite(value) and value > 0):
        raise InvalidInputError(f"temperature must be finite and > 0, got {value}")
    return value


def softmax_with_temperature(logit_row, t: "Temperature | float") -> np.ndarray:
    """sigma_SM(z / T) for one logit vector, computed with max subtraction."""
    z = np.asarray(logit_row, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits must be finite")
    scaled = z / _temperature_value(t)
    e = np.exp(scaled - scaled.max())
    return e / e.sum()


def scale_probabilities(m: LogitMatrix, t: "Temperature | float") -> PredictionSet:
    """Row-wise tempered softmax of a logit matrix as a PredictionSet.

    Predicted classes come from the raw logits so that the T = 1 argmax is kept
    exactly, ties included.
    """
    value = _temperature_value(t)
    scaled = m.logits / value
    e = np.exp(scaled - scaled.max(axis=1, keepdims=True))
    probs = e / e.sum(axis=1, keepdims=True)
    preds = derive_predictions(probs, m.labels, m.sample_ids)
    predictions = np.argmax(m.logits, axis=1)
    return PredictionSet(
        probabilities=preds.probabilities,
        labels=preds.labels,
        sample_ids=preds.sample_ids,
        predictions=predictions,
        confidences=probs[np.arange(m.n), predictions],
    )


def nll(m: LogitMatrix, t: "Temperature | float") -> float:
    """Mean negative log-likelihood of the true labels under sigma_SM(z / T)."""
    value = _temperature_value(t)
    if m.n == 0:
        raise InvalidInputError("NLL of an empty logit matrix")
    scaled = m.logits / value
    log_norm = logsumexp(scaled, axis=1)
    per_sample = log_norm - scaled[np.arange(m.n), m.labels]
    return math.fsum(per_sample) / m.n


def fit_temperature(holdout: LogitMatrix, cfg: FitConfig | None = None) -> Temperature:
    """Fit T by minimizing holdout NLL over ln T.

    A coarse grid over [log_t_lower, log_t_upper] picks the best bracket, then a
    golden-section search refines within it to `cfg.tolerance` in ln T.
    """
    cfg = cfg or FitConfig()
    if holdout.n == 0:
        raise InvalidInputError("cannot fit a temperature on an empty holdout")

    def objective(log_t: float) -> float:
        value = nll(holdout, math.exp(log_t))
        if not math.isfinite(value):
            raise NumericError(f"non-finite NLL at T={math.exp(log_t):.6g}")
        return value

    lo, hi, grid_x, grid_f = grid_bracket(
        objective, cfg.log_t_lower, cfg.log_t_upper, cfg.grid_points
    )
    x, fx, iterations = golden_section(objective, lo, hi, cfg.tolerance, cfg.max_iterations)
    if grid_f < fx:
        x, fx = grid_x, grid_f
    logger.debug("temperature fit: T=%.6g nll=%.6g after %d steps", math.exp(x), fx, iterations)
    return Temperature(value=math.exp(x), nll_at_fit=fx, iterations=iterations)
