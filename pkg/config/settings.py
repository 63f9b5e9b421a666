"""Runtime settings and experiment configuration for texcal."""

import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.errors import ArtifactError, ConfigError
from src.models.schemas import Variant


class Settings(BaseSettings):
    """Process-level settings loaded from the environment (TEXCAL_*) or .env."""

    model_config = SettingsConfigDict(env_prefix="TEXCAL_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    out_dir: str = "output"
    workers: int = 1  # rendering threads; output is identical for any value


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


def blur_grid(points: int = 9) -> list[float]:
    """Geometric blur grid 1, 2, 4, ... (doubling)."""
    return [float(2**i) for i in range(points)]


def noise_grid(stride: int = 8, upper: int = 50) -> list[float]:
    """Linear noise grid from 1 in steps of `stride`; the last point is moved to `upper`."""
    values = [float(v) for v in range(1, upper + 1, stride)]
    values[-1] = float(upper)
    return values


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(_Section):
    root_seed: int = Field(default=2023, ge=0, lt=2**64)
    image_size: int = Field(default=224, ge=16)
    variants: list[Variant] = Field(default_factory=lambda: list(Variant))
    dataset_dir: str = "dataset"  # relative paths resolve under the output directory


class ModelSection(_Section):
    input_size: int = Field(default=64, ge=4)
    channels: list[int] = Field(default_factory=lambda: [8, 16, 32])
    kernel_size: int = 3
    dilations: list[int] = Field(default_factory=lambda: [1, 2, 4])
    num_classes: int = Field(default=4, ge=2)

    @model_validator(mode="after")
    def _check_layers(self):
        if len(self.channels) != len(self.dilations):
            raise ValueError("model.channels and model.dilations must have equal length")
        if any(d < 1 for d in self.dilations):
            raise ValueError("model.dilations must be >= 1")
        if any(c < 1 for c in self.channels):
            raise ValueError("model.channels must be >= 1")
        if self.kernel_size != 3:
            raise ValueError("model.kernel_size must be 3")
        if self.input_size % (2 ** len(self.channels)) != 0:
            raise ValueError("model.input_size must be divisible by 2**layers")
        return self


class TrainSection(_Section):
    epochs: int = Field(default=40, ge=1)
    batch_size: int = Field(default=16, ge=1)
    learning_rate: float = Field(default=0.02, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=1e-4, ge=0)
    grad_clip: float = Field(default=5.0, gt=0)  # max global gradient norm per step
    seed: int = Field(default=0, ge=0)


class SplitSection(_Section):
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    folds: int = Field(default=5, ge=2)


class FitSection(_Section):
    log_t_lower: float = math.log(0.05)
    log_t_upper: float = math.log(20.0)
    tolerance: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=200, ge=1)
    grid_points: int = Field(default=64, ge=3)

    @model_validator(mode="after")
    def _check_bounds(self):
        if not self.log_t_lower < self.log_t_upper:
            raise ValueError("fit.log_t_lower must be < fit.log_t_upper")
        return self


class BinningSection(_Section):
    m: int = Field(default=10, ge=1)


class AugmentSection(_Section):
    blur_sigma_max: float = Field(default=256.0, gt=0)
    noise_sigma_max: float = Field(default=50.0, gt=0)
    apply_probability: float = Field(default=0.5, ge=0, le=1)
    rotation_degrees: float = Field(default=45.0, ge=0)
    crop_scale_min: float = Field(default=0.8, gt=0, le=1)
    crop_scale_max: float = Field(default=1.0, gt=0, le=1)

    @model_validator(mode="after")
    def _check_crop(self):
        if self.crop_scale_min > self.crop_scale_max:
            raise ValueError("augment.crop_scale_min must be <= augment.crop_scale_max")
        return self


class TestGroupSection(_Section):
    __test__ = False

    blur_cap: float = Field(default=32.0, ge=1)
    noise_cap: float = Field(default=30.0, ge=1)


class SweepSection(_Section):
    blur_sigmas: list[float] = Field(default_factory=blur_grid)
    noise_sigmas: list[float] = Field(default_factory=noise_grid)

    @field_validator("blur_sigmas", "noise_sigmas")
    @classmethod
    def _strictly_increasing(cls, values: list[float]) -> list[float]:
        if not values:
            raise ValueError("sweep grid must not be empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        return values

    @field_validator("blur_sigmas")
    @classmethod
    def _positive(cls, values: list[float]) -> list[float]:
        if values[0] <= 0:
            raise ValueError("blur sigmas must be > 0")
        return values

    @field_validator("noise_sigmas")
    @classmethod
    def _non_negative(cls, values: list[float]) -> list[float]:
        if values[0] < 0:
            raise ValueError("noise sigmas must be >= 0")
        return values


class ExperimentConfig(_Section):
    """Validated experiment configuration; every section has full defaults."""

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    split: SplitSection = Field(default_factory=SplitSection)
    fit: FitSection = Field(default_factory=FitSection)
    binning: BinningSection = Field(default_factory=BinningSection)
    augment: AugmentSection = Field(default_factory=AugmentSection)
    test_groups: TestGroupSection = Field(default_factory=TestGroupSection)
    sweep: SweepSection = Field(default_factory=SweepSection)

    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    def with_overrides(
        self,
        seed: int | None = None,
        bins: int | None = None,
    ) -> "ExperimentConfig":
        """Apply command-line overrides, re-validating the result."""
        data = self.model_dump(mode="json")
        if seed is not None:
            data["experiment"]["root_seed"] = seed
        if bins is not None:
            data["binning"]["m"] = bins
        return parse_config(data)

    def dataset_path(self, out_dir: Path) -> Path:
        path = Path(self.experiment.dataset_dir)
        return path if path.is_absolute() else out_dir / path

    def to_toml(self) -> str:
        return tomli_w.dumps(self.model_dump(mode="json"))


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a raw mapping, converting pydantic errors to ConfigError."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Load a TOML experiment config; a missing path means all defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return parse_config(data)


def echo_config(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    """Write the effective config (every value explicit) for provenance."""
    out_dir = Path(out_dir)
    target = out_dir / "config_effective.toml"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        target.write_text(cfg.to_toml(), encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot write {target}: {e}") from e
    return target
