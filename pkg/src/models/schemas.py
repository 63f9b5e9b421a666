"""Pydantic schemas for dataset records and experiment enums."""

from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class TextureClass(str, Enum):
    """Kudo pit-pattern class of a phantom."""
    ASTEROID = "A"
    GYRUS = "G"
    OVAL = "O"
    ROUND = "R"

    @property
    def label(self) -> int:
        """Class index used by the classifier (A=0, G=1, O=2, R=3)."""
        return CLASS_ORDER.index(self)

    @classmethod
    def from_label(cls, label: int) -> "TextureClass":
        return CLASS_ORDER[label]


CLASS_ORDER = (TextureClass.ASTEROID, TextureClass.GYRUS, TextureClass.OVAL, TextureClass.ROUND)


class Variant(str, Enum):
    """Training augmentation regime."""
    I = "I"  # noqa: E741 - geometric only
    II = "II"  # + blur
    III = "III"  # + noise


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class TestGroup(str, Enum):
    """Expanded test partition."""
    __test__ = False  # not a pytest class

    CLEAN = "A"
    BLUR = "B"
    NOISE = "C"
    BLUR_NOISE = "D"


class PhantomSpec(BaseModel):
    """One synthetic phantom: class, geometry variant, material and contact angle."""
    model_config = ConfigDict(frozen=True)

    texture_class: TextureClass
    geometry_variant: int = Field(ge=1, le=10)
    material_level: int = Field(ge=1, le=4)
    contact_angle: Literal[0, 45] = 0
    seed: int = 0

    @property
    def key(self) -> str:
        """Stable identifier, unique per (class, variant, material, angle)."""
        return (
            f"{self.texture_class.value}{self.geometry_variant:02d}"
            f"m{self.material_level}a{self.contact_angle:02d}"
        )


class SampleRecord(BaseModel):
    """A manifest row: one image and its split / fold / group assignment."""
    sample_id: str
    spec: PhantomSpec
    path: str
    split: Split | None = None
    fold: int | None = None
    group: TestGroup | None = None
    blur_sigma: float | None = None
    noise_sigma: float | None = None

    @property
    def label(self) -> int:
        return self.spec.texture_class.label

    @property
    def source_id(self) -> str:
        """Id of the rendered phantom this record derives from."""
        return self.sample_id.split("-", 1)[0]


class DatasetManifest(BaseModel):
    """All sample records of a generated dataset, ordered by sample_id."""
    samples: list[SampleRecord] = Field(default_factory=list)

    def base_samples(self) -> list[SampleRecord]:
        """Rendered phantoms (excludes derived test-group copies)."""
        return [s for s in self.samples if s.sample_id == s.source_id]

    def train(self) -> list[SampleRecord]:
        return [s for s in self.base_samples() if s.split == Split.TRAIN]

    def test(self) -> list[SampleRecord]:
        return [s for s in self.base_samples() if s.split == Split.TEST]

    def expanded_test(self) -> list[SampleRecord]:
        """Group A-D records, ordered by group then sample id."""
        records = [s for s in self.samples if s.group is not None]
        order = list(TestGroup)
        return sorted(records, key=lambda s: (order.index(s.group), s.source_id))

    def group(self, group: TestGroup) -> list[SampleRecord]:
        return [s for s in self.expanded_test() if s.group == group]

    def class_counts(self, records: list[SampleRecord] | None = None) -> dict[str, int]:
        records = self.base_samples() if records is None else records
        counts = {c.value: 0 for c in TextureClass}
        for s in records:
            counts[s.spec.texture_class.value] += 1
        return counts
