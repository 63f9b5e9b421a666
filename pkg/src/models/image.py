"""Single-channel 8-bit raster image."""

from dataclasses import dataclass

import numpy as np

from src.errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Row-major 8-bit intensities, shape (height, width)."""
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 2 or self.pixels.dtype != np.uint8:
            raise InvalidInputError(
                f"ImageBuffer needs a 2-D uint8 array, got {self.pixels.dtype}{self.pixels.shape}"
            )
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise InvalidInputError("ImageBuffer dimensions must be >= 1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_float(cls, values: np.ndarray) -> "ImageBuffer":
        """Round to nearest and clamp to [0, 255]."""
        return cls(np.clip(np.rint(values), 0, 255).astype(np.uint8))

    @classmethod
    def constant(cls, width: int, height: int, value: int) -> "ImageBuffer":
        return cls(np.full((height, width), value, dtype=np.uint8))

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )
