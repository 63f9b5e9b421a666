"""Geometric augmentations: random crop, flips and rotation with bilinear sampling."""

import math
from dataclasses import dataclass

import numpy as np

from src.errors import InvalidInputError
from src.models.image import ImageBuffer

from .rng import RngStream


@dataclass(frozen=True)
class AugmentParams:
    """Augmentation ranges; each operation fires with `apply_probability`."""
    blur_sigma_max: float = 256.0
    noise_sigma_max: float = 50.0
    apply_probability: float = 0.5
    rotation_range: tuple[float, float] = (-45.0, 45.0)
    crop_scale_range: tuple[float, float] = (0.8, 1.0)
    blur_sigma_min: float = 1.0
    noise_sigma_min: float = 1.0

    def __post_init__(self):
        if self.blur_sigma_max <= 0 or self.noise_sigma_max <= 0:
            raise InvalidInputError("sigma maxima must be > 0")
        if not 0 <= self.apply_probability <= 1:
            raise InvalidInputError("apply_probability must be in [0, 1]")

    @classmethod
    def from_section(cls, section) -> "AugmentParams":
        return cls(
            blur_sigma_max=section.blur_sigma_max,
            noise_sigma_max=section.noise_sigma_max,
            apply_probability=section.apply_probability,
            rotation_range=(-section.rotation_degrees, section.rotation_degrees),
            crop_scale_range=(section.crop_scale_min, section.crop_scale_max),
        )


def _linear_taps(n_in: int, n_out: int):
    src = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment."""
    h, w = values.shape
    r0, r1, fr = _linear_taps(h, out_h)
    rows = values[r0] * (1 - fr)[:, None] + values[r1] * fr[:, None]
    c0, c1, fc = _linear_taps(w, out_w)
    return rows[:, c0] * (1 - fc) + rows[:, c1] * fc


def _reflect_coord(c: np.ndarray, n: int) -> np.ndarray:
    # mirror about the outer pixel edges (-0.5 and n - 0.5)
    m = np.mod(c + 0.5, 2 * n)
    m = np.where(m >= n, 2 * n - m, m)
    return np.clip(m - 0.5, 0, n - 1)


def sample_bilinear(values: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear lookup at fractional coordinates, reflecting outside the image."""
    h, w = values.shape
    ys = _reflect_coord(ys, h)
    xs = _reflect_coord(xs, w)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    top = values[y0, x0] * (1 - fx) + values[y0, x1] * fx
    bottom = values[y1, x0] * (1 - fx) + values[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def rotate_array(values: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center by `degrees` (counterclockwise on screen)."""
    h, w = values.shape
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = (h - 1) / 2, (w - 1) / 2
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    # inverse mapping: output pixel -> source coordinate
    src_x = cos_t * dx - sin_t * dy + cx
    src_y = sin_t * dx + cos_t * dy + cy
    return sample_bilinear(values, src_y, src_x)


def crop_resize_array(values: np.ndarray, scale: float, top: int, left: int) -> np.ndarray:
    h, w = values.shape
    ch = max(1, round(scale * h))
    cw = max(1, round(scale * w))
    return resize_bilinear(values[top:top + ch, left:left + cw], h, w)


def geometric_augment(img: ImageBuffer, params: AugmentParams, rng: RngStream) -> ImageBuffer:
    """crop -> flip-h -> flip-v -> rotate, each applied on an independent coin.

    Output dimensions equal the input's; the result is rounded once at the end.
    """
    values = img.as_float()
    h, w = values.shape
    p = params.apply_probability

    if rng.coin(p):
        scale = rng.uniform(*params.crop_scale_range)
        ch, cw = max(1, round(scale * h)), max(1, round(scale * w))
        top = min(int(rng.uniform(0, h - ch + 1)), h - ch)
        left = min(int(rng.uniform(0, w - cw + 1)), w - cw)
        values = crop_resize_array(values, scale, top, left)
    if rng.coin(p):
        values = values[:, ::-1]
    if rng.coin(p):
        values = values[::-1, :]
    if rng.coin(p):
        values = rotate_array(values, rng.uniform(*params.rotation_range))

    return ImageBuffer.from_float(values)
