"""Shared fixtures: small models, toy images and a low-resolution generated dataset."""

from pathlib import Path

import numpy as np
import pytest

from src.augment.rng import RngStream
from src.calibration.scaling import LogitMatrix, nll
from src.classifier.network import ModelConfig, init_model
from src.models.image import ImageBuffer
from src.synth.dataset import build_dataset

SMALL_IMAGE = 32


class ScriptedRng:
    """Stand-in for RngStream that replays scripted coin flips and uniforms."""

    def __init__(self, coins: list[bool], uniforms: list[float] | None = None):
        self.coins = list(coins)
        self.uniforms = list(uniforms or [])
        self.normal_calls = 0

    def coin(self, p: float) -> bool:
        return self.coins.pop(0)

    def uniform(self, low: float, high: float) -> float:
        return self.uniforms.pop(0) if self.uniforms else (low + high) / 2

    def normal(self, sigma: float, shape: tuple[int, ...]) -> np.ndarray:
        self.normal_calls += 1
        return np.zeros(shape)


@pytest.fixture
def scripted_rng():
    return ScriptedRng


@pytest.fixture
def tiny_config() -> ModelConfig:
    # 290 parameters: small enough for exhaustive finite differences
    return ModelConfig(input_size=8, channels=(4, 6), dilations=(1, 2), num_classes=4)


@pytest.fixture
def tiny_model(tiny_config):
    return init_model(tiny_config, seed=3)


@pytest.fixture
def random_image():
    def make(width: int = 24, height: int = 24, seed: int = 0) -> ImageBuffer:
        rng = RngStream(seed, "fixture-image").generator
        return ImageBuffer(rng.integers(0, 256, size=(height, width), dtype=np.uint8))

    return make


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> tuple[Path, object]:
    """Full 229-sample topology rendered at 32 px (shared, read-only)."""
    root = tmp_path_factory.mktemp("dataset")
    manifest = build_dataset(2023, root, size=SMALL_IMAGE)
    return root, manifest


@pytest.fixture
def grid_temperature():
    """Brute-force NLL minimizer over an even grid in ln T around `center`.

    Returns (T, grid step in ln T).
    """
    def search(m: LogitMatrix, center: float = 1.0, span: float = 1.5, points: int = 3001):
        log_ts = np.linspace(np.log(center) - span, np.log(center) + span, points)
        losses = [nll(m, float(np.exp(x))) for x in log_ts]
        return float(np.exp(log_ts[int(np.argmin(losses))])), float(log_ts[1] - log_ts[0])

    return search
