from pathlib import Path
from typing import List

import numpy as np
from pytest import fixture, raises

from multicat.augmentation.color import (
    MissingColorStatisticsError,
    color_augment,
    compute_color_statistics,
    load_color_statistics,
    save_color_statistics,
)
from multicat.data.images import array_to_image, image_to_array, load_rgb_image


@fixture
def noise_images(path_work) -> List[Path]:
    rng = np.random.default_rng(0)
    paths = []
    for index in range(3):
        path = path_work / f"noise_{index}.png"
        # Correlated channels so that the eigenvalues are distinct
        base = rng.uniform(0.0, 1.0, size=(8, 8, 1))
        pixels = 0.6 * base + 0.4 * rng.uniform(0.0, 1.0, size=(8, 8, 3)) * np.array([1.0, 0.5, 0.2])
        array_to_image(pixels).save(path)
        paths.append(path)
    return paths


def test_zero_strength_is_identity():
    image = np.random.default_rng(1).uniform(size=(5, 4, 3)).astype(np.float32)
    assert color_augment(image, 0.0, np.random.default_rng(2), None) is image


def test_positive_strength_needs_statistics():
    with raises(MissingColorStatisticsError):
        color_augment(np.zeros((2, 2, 3)), 0.1, np.random.default_rng(0), None)


def test_statistics_match_direct_eigendecomposition(noise_images):
    statistics = compute_color_statistics([str(path) for path in noise_images], max_pixels=10_000, seed=0)

    pixels = np.concatenate([image_to_array(load_rgb_image(path)).reshape(-1, 3) for path in noise_images])
    covariance = np.cov(pixels.astype(np.float64), rowvar=False)
    eigenvalues, eigenvectors = np.linalg.eig(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, eigenvectors = eigenvalues[order].real, eigenvectors[:, order].real

    assert np.all(np.diff(statistics.eigenvalues) <= 0)
    assert np.allclose(statistics.eigenvalues, eigenvalues, atol=1e-9)
    reconstructed = statistics.eigenvectors @ np.diag(statistics.eigenvalues) @ statistics.eigenvectors.T
    assert np.allclose(reconstructed, covariance, atol=1e-9)

    # Eigenvectors are unique up to sign
    signs = np.sign(np.sum(eigenvectors * statistics.eigenvectors, axis=0))
    eigenvectors = eigenvectors * signs
    image = np.full((4, 4, 3), 0.5)
    strength = 0.1
    augmented = color_augment(image, strength, np.random.default_rng(3), statistics)
    alpha = np.random.default_rng(3).normal(0.0, strength, size=3)
    expected = image + eigenvectors @ (alpha * eigenvalues)
    assert np.allclose(augmented, expected, atol=1e-6)


def test_statistics_file(path_work, noise_images):
    statistics = compute_color_statistics([str(path) for path in noise_images], max_pixels=100, seed=4)
    path = path_work / "stats" / "color_statistics.txt"
    save_color_statistics(statistics, path)
    loaded = load_color_statistics(path)
    assert np.array_equal(loaded.eigenvalues, statistics.eigenvalues)
    assert np.array_equal(loaded.eigenvectors, statistics.eigenvectors)

    with raises(MissingColorStatisticsError):
        load_color_statistics(path_work / "missing.txt")
