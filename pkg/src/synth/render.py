"""Procedural Kudo-style pit-pattern textures standing in for tactile phantom images.

Lengths are specified in micron-like units and mapped to pixels at
UNITS_PER_PIXEL on a 224 px canvas (scaled proportionally for other sizes).
Across classes feature sizes span 300-900 units with a nominal spacing of 600.
The layout depends only on (class, geometry variant) through `spec.seed`, so
material level and contact angle change contrast, not geometry.
"""

import math

import numpy as np
from scipy.ndimage import gaussian_filter

from src.errors import InvalidInputError
from src.models.image import ImageBuffer
from src.models.schemas import PhantomSpec, TextureClass

UNITS_PER_PIXEL = 10.0
REFERENCE_SIZE = 224
SPACING_UNITS = 600.0

BACKGROUND = 60.0
AMPLITUDE = 160.0
# material levels 1..4 map to four equal contrast steps
CONTRAST_STEPS = (0.625, 0.75, 0.875, 1.0)
ANGLED_FLOOR = 0.15
EDGE_SOFTNESS_UNITS = 12.0

ROUND_DIAMETER = (300.0, 450.0)
OVAL_LENGTH = (600.0, 900.0)
OVAL_WIDTH = (300.0, 450.0)
ASTEROID_DIAMETER = (450.0, 700.0)
GYRUS_WAVELENGTH = 600.0
GYRUS_FILL = 0.65


class _Canvas:
    def __init__(self, size: int):
        self.size = size
        self.px_per_unit = size / REFERENCE_SIZE / UNITS_PER_PIXEL
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        self.yy = yy
        self.xx = xx
        self.mask = np.zeros((size, size))

    def px(self, units: float) -> float:
        return units * self.px_per_unit

    def lattice(
        self,
        rng: np.random.Generator,
        along: float,
        across: float,
        angle: float,
        jitter: float = 0.15,
    ):
        """Jittered lattice centers (rotated by `angle`) covering the canvas."""
        step_a, step_c = self.px(along), self.px(across)
        half = self.size * 0.75
        c, s = math.cos(angle), math.sin(angle)
        ox, oy = rng.uniform(0, step_a), rng.uniform(0, step_c)
        centers = []
        for u in np.arange(-half + ox, half, step_a):
            for v in np.arange(-half + oy, half, step_c):
                ju = rng.uniform(-jitter, jitter) * step_a
                jv = rng.uniform(-jitter, jitter) * step_c
                x = self.size / 2 + (u + ju) * c - (v + jv) * s
                y = self.size / 2 + (u + ju) * s + (v + jv) * c
                if -step_a < x < self.size + step_a and -step_a < y < self.size + step_a:
                    centers.append((x, y))
        return centers

    def stamp(self, inside: np.ndarray):
        np.maximum(self.mask, inside.astype(np.float64), out=self.mask)


def _round(canvas: _Canvas, rng: np.random.Generator):
    for x, y in canvas.lattice(
        rng, SPACING_UNITS, SPACING_UNITS, rng.uniform(0, math.pi / 2), jitter=0.1
    ):
        r = canvas.px(rng.uniform(*ROUND_DIAMETER)) / 2
        canvas.stamp((canvas.xx - x) ** 2 + (canvas.yy - y) ** 2 <= r * r)


def _oval(canvas: _Canvas, rng: np.random.Generator):
    theta0 = rng.uniform(0, math.pi)
    bend = rng.uniform(-0.35, 0.35)
    along = OVAL_LENGTH[1] * 1.1
    for x, y in canvas.lattice(rng, along, SPACING_UNITS, theta0):
        # smoothly varying but coherent orientation field
        theta = theta0 + bend * math.sin(2 * math.pi * x / canvas.size)
        a = canvas.px(rng.uniform(*OVAL_LENGTH)) / 2
        b = canvas.px(rng.uniform(*OVAL_WIDTH)) / 2
        dx, dy = canvas.xx - x, canvas.yy - y
        u = dx * math.cos(theta) + dy * math.sin(theta)
        v = -dx * math.sin(theta) + dy * math.cos(theta)
        canvas.stamp((u / a) ** 2 + (v / b) ** 2 <= 1.0)


def _asteroid(canvas: _Canvas, rng: np.random.Generator):
    for x, y in canvas.lattice(rng, SPACING_UNITS, SPACING_UNITS, rng.uniform(0, math.pi / 2)):
        radius = canvas.px(rng.uniform(*ASTEROID_DIAMETER)) / 2
        points = int(rng.integers(4, 7))
        phase = rng.uniform(0, 2 * math.pi)
        dx, dy = canvas.xx - x, canvas.yy - y
        phi = np.arctan2(dy, dx)
        # star outline: radius oscillates between 0.3 R and R
        outline = radius * (0.65 + 0.35 * np.cos(points * phi + phase))
        canvas.stamp(dx * dx + dy * dy <= outline * outline)


def _gyrus(canvas: _Canvas, rng: np.random.Generator):
    white = rng.standard_normal((canvas.size, canvas.size))
    sigma = canvas.px(GYRUS_WAVELENGTH) / 8
    band = gaussian_filter(white, sigma, mode="wrap") - gaussian_filter(
        white, 1.6 * sigma, mode="wrap"
    )
    threshold = np.quantile(band, 1 - GYRUS_FILL)
    canvas.stamp(band > threshold)


_PAINTERS = {
    TextureClass.ROUND: _round,
    TextureClass.OVAL: _oval,
    TextureClass.ASTEROID: _asteroid,
    TextureClass.GYRUS: _gyrus,
}


def _angle_ramp(size: int, side: int) -> np.ndarray:
    """Contrast multiplier: flat over one half, fading linearly across the other."""
    t = np.linspace(0.0, 1.0, size)
    profile = np.where(t < 0.5, 1.0, 1.0 - (1.0 - ANGLED_FLOOR) * (t - 0.5) / 0.5)
    ramp = np.tile(profile, (size, 1))
    return np.rot90(ramp, side)


def render_phantom(spec: PhantomSpec, size: int = REFERENCE_SIZE) -> ImageBuffer:
    """Deterministic texture image of `size` x `size` pixels for a phantom spec."""
    if size < 8:
        raise InvalidInputError(f"render size must be >= 8, got {size}")
    painter = _PAINTERS.get(spec.texture_class)
    if painter is None:
        raise InvalidInputError(f"unknown texture class {spec.texture_class!r}")

    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    canvas = _Canvas(size)
    painter(canvas, rng)
    relief = gaussian_filter(canvas.mask, canvas.px(EDGE_SOFTNESS_UNITS), mode="nearest")

    contrast = CONTRAST_STEPS[spec.material_level - 1]
    if spec.contact_angle == 45:
        relief = relief * _angle_ramp(size, int(rng.integers(0, 4)))
    return ImageBuffer.from_float(BACKGROUND + AMPLITUDE * contrast * relief)
