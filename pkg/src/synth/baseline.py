"""Nearest-centroid baseline on block-averaged thumbnails."""

import numpy as np

from src.errors import InvalidInputError
from src.models.image import ImageBuffer


def thumbnail(img: ImageBuffer, cells: int = 8) -> np.ndarray:
    """cells x cells block means, flattened (trailing rows/cols beyond a full block dropped)."""
    h, w = img.height // cells, img.width // cells
    if h == 0 or w == 0:
        raise InvalidInputError(f"image {img.width}x{img.height} smaller than {cells} cells")
    values = img.as_float()[: h * cells, : w * cells]
    return values.reshape(cells, h, cells, w).mean(axis=(1, 3)).ravel()


def nearest_centroid_accuracy(
    train_images: list[ImageBuffer],
    train_labels: np.ndarray,
    test_images: list[ImageBuffer],
    test_labels: np.ndarray,
    cells: int = 8,
) -> float:
    x_train = np.stack([thumbnail(img, cells) for img in train_images])
    x_test = np.stack([thumbnail(img, cells) for img in test_images])
    train_labels = np.asarray(train_labels)
    classes = np.unique(train_labels)
    centroids = np.stack([x_train[train_labels == c].mean(axis=0) for c in classes])
    dist = ((x_test[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    predicted = classes[np.argmin(dist, axis=1)]
    return float(np.mean(predicted == np.asarray(test_labels)))
