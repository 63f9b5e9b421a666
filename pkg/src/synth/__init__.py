"""Synthetic pit-pattern phantoms and the dataset split topology."""

from .baseline import nearest_centroid_accuracy
from .dataset import (
    build_dataset,
    build_test_groups,
    kfold,
    load_dataset,
    plan_phantoms,
    stratified_split,
)
from .render import render_phantom

__all__ = [
    "build_dataset",
    "build_test_groups",
    "kfold",
    "load_dataset",
    "nearest_centroid_accuracy",
    "plan_phantoms",
    "render_phantom",
    "stratified_split",
]
