"""Binned calibration statistics: reliability bins, ECE, MCE and ACE."""

import math
from dataclasses import dataclass, field

import numpy as np

from src.errors import InvalidInputError

ROW_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Per-sample class probabilities with derived predictions and confidences.

    `predictions` is the row argmax (smallest index on ties) and `confidences`
    the row maximum.
    """
    probabilities: np.ndarray
    labels: np.ndarray
    sample_ids: list[str]
    predictions: np.ndarray = field(repr=False)
    confidences: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.probabilities.shape[0]

    @property
    def k(self) -> int:
        return self.probabilities.shape[1]

    @property
    def correct(self) -> np.ndarray:
        return self.predictions == self.labels

    def take(self, indices) -> "PredictionSet":
        """Subset by row indices (used for per-group reports)."""
        idx = np.asarray(indices, dtype=np.int64)
        return PredictionSet(
            probabilities=self.probabilities[idx],
            labels=self.labels[idx],
            sample_ids=[self.sample_ids[i] for i in idx],
            predictions=self.predictions[idx],
            confidences=self.confidences[idx],
        )


@dataclass(frozen=True)
class BinningConfig:
    m: int = 10

    def __post_init__(self):
        if self.m < 1:
            raise InvalidInputError(f"bin count must be >= 1, got {self.m}")


@dataclass(frozen=True)
class BinStats:
    """One equal-width confidence bin [lower, upper)."""
    bin_index: int
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float
    correct_sum: float = 0.0
    confidence_sum: float = 0.0

    @property
    def gap(self) -> float:
        return abs(self.accuracy - self.confidence)


@dataclass(frozen=True)
class ReliabilityReport:
    bins: list[BinStats]
    n: int
    ece: float
    mce: float
    ace: float
    accuracy: float
    avg_confidence: float
    nonempty_bins: int

    @property
    def m(self) -> int:
        return len(self.bins)

    @property
    def gap(self) -> float:
        """Average confidence minus accuracy; positive means overconfident."""
        return self.avg_confidence - self.accuracy

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "accuracy": self.accuracy,
            "avg_confidence": self.avg_confidence,
            "ece": self.ece,
            "mce": self.mce,
            "ace": self.ace,
            "nonempty_bins": self.nonempty_bins,
        }


def derive_predictions(
    probabilities,
    labels,
    sample_ids: list[str] | None = None,
) -> PredictionSet:
    """Build a PredictionSet from an n x k probability matrix and true labels."""
    probs = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2:
        raise InvalidInputError(f"probabilities must be 2-D, got shape {probs.shape}")
    n, k = probs.shape
    if n < 1 or k < 2:
        raise InvalidInputError(f"need n >= 1 and k >= 2, got n={n}, k={k}")
    if labels.shape != (n,):
        raise InvalidInputError(f"labels shape {labels.shape} does not match {n} rows")
    if not np.all(np.isfinite(probs)) or probs.min() < 0 or probs.max() > 1:
        raise InvalidInputError("probabilities must be finite and within [0, 1]")
    row_error = np.abs(probs.sum(axis=1) - 1.0)
    bad = np.flatnonzero(row_error > ROW_SUM_TOLERANCE)
    if bad.size:
        row = bad[0]
        raise InvalidInputError(f"row {row} is not normalized (sum off by {row_error[row]:.3g})")
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidInputError(f"labels must lie in [0, {k})")
    if sample_ids is None:
        sample_ids = [str(i) for i in range(n)]
    elif len(sample_ids) != n:
        raise InvalidInputError(f"{len(sample_ids)} sample ids for {n} rows")

    # np.argmax returns the first maximal index
    predictions = np.argmax(probs, axis=1)
    confidences = probs[np.arange(n), predictions]
    return PredictionSet(
        probabilities=probs,
        labels=labels,
        sample_ids=list(sample_ids),
        predictions=predictions,
        confidences=confidences,
    )


def bin_indices(confidences: np.ndarray, m: int) -> np.ndarray:
    """floor(p * m), with p == 1 clamped into the last bin."""
    idx = np.floor(np.asarray(confidences) * m).astype(np.int64)
    return np.clip(idx, 0, m - 1)


def bin_predictions(preds: PredictionSet, cfg: BinningConfig) -> list[BinStats]:
    """Assign each sample to an equal-width confidence bin and aggregate."""
    m = cfg.m
    idx = bin_indices(preds.confidences, m)
    correct = preds.correct.astype(np.float64)
    bins = []
    for b in range(m):
        mask = idx == b
        count = int(mask.sum())
        # fsum is exactly rounded, so the sums do not depend on sample order
        correct_sum = math.fsum(correct[mask])
        confidence_sum = math.fsum(preds.confidences[mask])
        bins.append(BinStats(
            bin_index=b,
            lower=b / m,
            upper=(b + 1) / m,
            count=count,
            accuracy=correct_sum / count if count else 0.0,
            confidence=confidence_sum / count if count else 0.0,
            correct_sum=correct_sum,
            confidence_sum=confidence_sum,
        ))
    return bins


def _nonempty(bins: list[BinStats]) -> list[BinStats]:
    nonempty = [b for b in bins if b.count > 0]
    if not nonempty:
        raise InvalidInputError("all bins are empty")
    return nonempty


def ece(bins: list[BinStats], n: int) -> float:
    """Expected calibration error: count-weighted mean bin gap."""
    if n <= 0:
        raise InvalidInputError("ECE needs n > 0")
    return math.fsum(b.count / n * b.gap for b in bins if b.count)


def mce(bins: list[BinStats]) -> float:
    """Maximum calibration error over nonempty bins."""
    return max(b.gap for b in _nonempty(bins))


def ace(bins: list[BinStats]) -> float:
    """Average calibration error: unweighted mean gap over nonempty bins."""
    nonempty = _nonempty(bins)
    return math.fsum(b.gap for b in nonempty) / len(nonempty)


def summarize(preds: PredictionSet, cfg: BinningConfig) -> ReliabilityReport:
    """Full reliability report: bins plus ECE, MCE, ACE, accuracy, avg confidence."""
    bins = bin_predictions(preds, cfg)
    n = preds.n
    return ReliabilityReport(
        bins=bins,
        n=n,
        ece=ece(bins, n),
        mce=mce(bins),
        ace=ace(bins),
        accuracy=math.fsum(preds.correct.astype(np.float64)) / n,
        avg_confidence=math.fsum(preds.confidences) / n,
        nonempty_bins=sum(1 for b in bins if b.count),
    )
