"""Image perturbations: blur, noise and geometric augmentation."""

from .filters import blur_array, gaussian_blur, gaussian_kernel, gaussian_noise
from .geometry import (
    AugmentParams,
    geometric_augment,
    resize_bilinear,
    rotate_array,
)
from .pipeline import degrade_for_group, training_pipeline
from .rng import RngStream, stream_key

__all__ = [
    "AugmentParams",
    "RngStream",
    "blur_array",
    "degrade_for_group",
    "gaussian_blur",
    "gaussian_kernel",
    "gaussian_noise",
    "geometric_augment",
    "resize_bilinear",
    "rotate_array",
    "stream_key",
    "training_pipeline",
]
