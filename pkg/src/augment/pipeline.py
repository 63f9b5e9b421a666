"""Training-time augmentation pipelines for dataset variants I-III."""

from src.errors import InvalidInputError
from src.models.image import ImageBuffer
from src.models.schemas import TestGroup, Variant

from .filters import gaussian_blur, gaussian_noise
from .geometry import AugmentParams, geometric_augment
from .rng import RngStream


def training_pipeline(
    img: ImageBuffer,
    variant: Variant | str,
    params: AugmentParams,
    rng: RngStream,
    trace: list[str] | None = None,
) -> ImageBuffer:
    """Variant-specific blur/noise step followed by geometric augmentation.

    I: geometric only. II: blur on a coin, sigma ~ U[blur_sigma_min, blur_sigma_max].
    III: noise on a coin, sigma ~ U[noise_sigma_min, noise_sigma_max].
    Names of the photometric steps applied are appended to `trace` when given.
    """
    try:
        variant = Variant(variant)
    except ValueError as e:
        raise InvalidInputError(f"unknown dataset variant: {variant!r}") from e

    if variant is Variant.II and rng.coin(params.apply_probability):
        img = gaussian_blur(img, rng.uniform(params.blur_sigma_min, params.blur_sigma_max))
        if trace is not None:
            trace.append("blur")
    elif variant is Variant.III and rng.coin(params.apply_probability):
        img = gaussian_noise(
            img, rng.uniform(params.noise_sigma_min, params.noise_sigma_max), rng
        )
        if trace is not None:
            trace.append("noise")

    return geometric_augment(img, params, rng)


def degrade_for_group(
    img: ImageBuffer,
    group: TestGroup | str,
    rng: RngStream,
    blur_cap: float = 32.0,
    noise_cap: float = 30.0,
) -> tuple[ImageBuffer, float | None, float | None]:
    """Test-group perturbation: returns (image, blur sigma, noise sigma).

    A is the clean image, B blurs, C adds noise, D blurs then adds noise. Each
    sigma is drawn uniformly in [1, cap]; in D both are drawn before either is
    applied.
    """
    try:
        group = TestGroup(group)
    except ValueError as e:
        raise InvalidInputError(f"unknown test group: {group!r}") from e
    blur_sigma = noise_sigma = None
    if group in (TestGroup.BLUR, TestGroup.BLUR_NOISE):
        blur_sigma = rng.uniform(1.0, blur_cap)
    if group in (TestGroup.NOISE, TestGroup.BLUR_NOISE):
        noise_sigma = rng.uniform(1.0, noise_cap)
    if blur_sigma is not None:
        img = gaussian_blur(img, blur_sigma)
    if noise_sigma is not None:
        img = gaussian_noise(img, noise_sigma, rng)
    return img, blur_sigma, noise_sigma
