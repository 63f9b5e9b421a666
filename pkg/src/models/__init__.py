"""Shared data types."""

from .image import ImageBuffer
from .schemas import (
    CLASS_ORDER,
    DatasetManifest,
    PhantomSpec,
    SampleRecord,
    Split,
    TestGroup,
    TextureClass,
    Variant,
)

__all__ = [
    "CLASS_ORDER",
    "DatasetManifest",
    "ImageBuffer",
    "PhantomSpec",
    "SampleRecord",
    "Split",
    "TestGroup",
    "TextureClass",
    "Variant",
]
