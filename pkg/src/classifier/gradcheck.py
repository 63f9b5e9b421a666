"""Finite-difference verification of the analytic gradients."""

import logging

import numpy as np

from src.augment.rng import RngStream

from .network import ModelParams, cross_entropy, forward_batch, loss_and_gradient

logger = logging.getLogger(__name__)

STEP = 1e-4
DENOMINATOR_FLOOR = 1e-6


def _probe(params: ModelParams, x: np.ndarray, labels: np.ndarray, flat: np.ndarray):
    """Loss and ReLU on/off pattern at a perturbed parameter vector."""
    logits, cache = forward_batch(params, x, flat)
    return cross_entropy(logits, labels), [z > 0 for z in cache.pre_activations]


def gradient_check(
    params: ModelParams,
    x: np.ndarray,
    labels: np.ndarray,
    samples: int = 200,
    seed: int = 0,
    step: float = STEP,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks `samples` randomly chosen parameters. A perturbation that switches a
    ReLU on or off straddles a kink, where the central difference is not a
    derivative; such parameters are replaced by another draw.
    """
    _, analytic, _ = loss_and_gradient(params, x, labels)
    _, base_pattern = _probe(params, x, labels, params.flat)
    order = RngStream(seed, "gradcheck").permutation(params.count)

    worst, checked, skipped = 0.0, 0, 0
    for idx in order:
        if checked >= samples:
            break
        plus = params.flat.copy()
        minus = params.flat.copy()
        plus[idx] += step
        minus[idx] -= step
        f_plus, pattern_plus = _probe(params, x, labels, plus)
        f_minus, pattern_minus = _probe(params, x, labels, minus)
        if any(
            not np.array_equal(a, b)
            for pattern in (pattern_plus, pattern_minus)
            for a, b in zip(pattern, base_pattern)
        ):
            skipped += 1
            continue
        numeric = (f_plus - f_minus) / (2 * step)
        denom = max(abs(analytic[idx]), abs(numeric), DENOMINATOR_FLOOR)
        worst = max(worst, abs(analytic[idx] - numeric) / denom)
        checked += 1
    logger.debug("gradient check: %d parameters, %d kinks skipped", checked, skipped)
    return worst
