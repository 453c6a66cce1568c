from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from multicat.data.images import image_to_array, load_rgb_image
from multicat.file import TEXT_ENCODING

logger = getLogger(__name__)

COLOR_STATISTICS_FILENAME = "color_statistics.txt"


class MissingColorStatisticsError(RuntimeError):
    """Raised when color augmentation is requested without eigenpair statistics."""

    def __init__(self):
        super().__init__(
            "Color augmentation needs the RGB eigenpairs of the training set. "
            'Run "multicat sample" (or compute_color_statistics) on the split first.'
        )


@dataclass(frozen=True)
class ColorStatistics:
    """Eigenpairs of the RGB covariance of the training pixels.

    eigenvectors holds one eigenvector per column, ordered by descending eigenvalue.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        if self.eigenvalues.shape != (3,) or self.eigenvectors.shape != (3, 3):
            raise ValueError("Color statistics need 3 eigenvalues and a 3x3 eigenvector matrix")
        if not (np.all(np.isfinite(self.eigenvalues)) and np.all(np.isfinite(self.eigenvectors))):
            raise ValueError("Color statistics must be finite")


def statistics_from_pixels(pixels: np.ndarray) -> ColorStatistics:
    """Eigendecomposition of the covariance of an N x 3 pixel array."""
    if pixels.ndim != 2 or pixels.shape[1] != 3 or len(pixels) < 2:
        raise ValueError(f"Need an N x 3 pixel array with N >= 2, got shape {pixels.shape}")
    covariance = np.cov(pixels.astype(np.float64), rowvar=False)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    # eigh may return tiny negative values for (near) singular covariances
    return ColorStatistics(np.clip(eigenvalues[order], 0.0, None), eigenvectors[:, order])


def compute_color_statistics(image_paths: Sequence[str], max_pixels: int, seed: int) -> ColorStatistics:
    """Statistics of the training images, using at most max_pixels pixels spread evenly over the images."""
    if not image_paths:
        raise ValueError("Color statistics need at least one training image")
    rng = np.random.default_rng(seed)
    per_image = max(1, max_pixels // len(image_paths))
    chunks = []
    for path in image_paths:
        pixels = image_to_array(load_rgb_image(path)).reshape(-1, 3)
        if len(pixels) > per_image:
            pixels = pixels[rng.choice(len(pixels), size=per_image, replace=False)]
        chunks.append(pixels)
    all_pixels = np.concatenate(chunks)[:max_pixels]
    logger.info("Computing color statistics from %d pixels of %d images", len(all_pixels), len(image_paths))
    return statistics_from_pixels(all_pixels)


def save_color_statistics(statistics: ColorStatistics, path: Path) -> None:
    """Plain text: the eigenvalues in the first row, then the eigenvector matrix row by row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.vstack([statistics.eigenvalues[np.newaxis, :], statistics.eigenvectors])
    with path.open("wt", encoding=TEXT_ENCODING) as io_wrapper:
        np.savetxt(io_wrapper, table, fmt="%.17g")


def load_color_statistics(path: Path) -> ColorStatistics:
    if not path.is_file():
        raise MissingColorStatisticsError()
    table = np.loadtxt(path, dtype=np.float64, encoding=TEXT_ENCODING)
    if table.shape != (4, 3):
        raise ValueError(f'Color statistics file "{path}" must hold 4 rows of 3 numbers, found shape {table.shape}')
    return ColorStatistics(table[0].copy(), table[1:].copy())


def color_augment(
    image: np.ndarray, strength: float, rng: np.random.Generator, statistics: Optional[ColorStatistics]
) -> np.ndarray:
    """PCA lighting: add eigenvectors @ (alpha * eigenvalues) with alpha ~ N(0, strength) to every pixel.

    image is H x W x 3 in [0, 1]; the result is clamped to [0, 1].
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"Expected an H x W x 3 image, got shape {image.shape}")
    if strength == 0:
        return image
    if statistics is None:
        raise MissingColorStatisticsError()
    alpha = rng.normal(0.0, strength, size=3)
    shift = statistics.eigenvectors @ (alpha * statistics.eigenvalues)
    return np.clip(image + shift.astype(image.dtype), 0.0, 1.0)
