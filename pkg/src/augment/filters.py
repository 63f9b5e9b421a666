"""Gaussian blur and additive Gaussian noise on 8-bit images."""

import math

import numpy as np

from src.errors import InvalidInputError
from src.models.image import ImageBuffer

from .rng import RngStream


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Discrete Gaussian of radius ceil(3 sigma), renormalized after truncation.

    Taps whose weight underflows to exactly zero are dropped, so a vanishing
    sigma yields the identity kernel [1].
    """
    if not sigma > 0:
        raise InvalidInputError(f"blur sigma must be > 0, got {sigma}")
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(x**2) / (2 * sigma**2))
    nonzero = np.flatnonzero(weights)
    trim = min(nonzero[0], len(weights) - 1 - nonzero[-1])
    if trim:
        weights = weights[trim:-trim]
    return weights / math.fsum(weights)


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Map arbitrary indices into [0, n) by mirror reflection with the edge repeated."""
    m = np.mod(idx, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def convolution_matrix(n: int, kernel: np.ndarray) -> np.ndarray:
    """n x n matrix applying a centered 1-D kernel with reflect borders."""
    radius = len(kernel) // 2
    rows = np.repeat(np.arange(n), len(kernel))
    offsets = np.tile(np.arange(-radius, radius + 1), n)
    cols = reflect_index(rows + offsets, n)
    weights = np.tile(kernel, n)
    flat = np.bincount(rows * n + cols, weights=weights, minlength=n * n)
    return flat.reshape(n, n)


def blur_array(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a float array (horizontal, then vertical)."""
    kernel = gaussian_kernel(sigma)
    h, w = values.shape
    horizontal = values @ convolution_matrix(w, kernel).T
    return convolution_matrix(h, kernel) @ horizontal


def gaussian_blur(img: ImageBuffer, sigma: float) -> ImageBuffer:
    """Blur in floating point, rounding and clamping once at the end."""
    return ImageBuffer.from_float(blur_array(img.as_float(), sigma))


def gaussian_noise(img: ImageBuffer, sigma: float, rng: RngStream) -> ImageBuffer:
    """Add i.i.d. N(0, sigma^2) intensity noise per pixel."""
    if sigma < 0:
        raise InvalidInputError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return ImageBuffer(img.pixels.copy())
    noise = rng.normal(sigma, img.pixels.shape)
    return ImageBuffer.from_float(img.as_float() + noise)
