from logging import getLogger
from pathlib import Path

import numpy as np
from PIL.Image import frombytes

from multicat.data.manifest import CategoryManifest, manifest_from_mapping, write_manifest
from multicat.data.split import TEST_SIDE, TRAIN_SIDE

logger = getLogger(__name__)

TOY_MANIFEST_NAME = "manifest.csv"
HSV_MODE = "HSV"


def toy_class_id(category: int, class_in_category: int) -> str:
    return f"c{category:02d}_{class_in_category:02d}"


def toy_category_name(category: int) -> str:
    return f"hue_{category:02d}"


def make_toy_pool(
    pool_root: Path,
    num_categories: int = 10,
    classes_per_category: int = 10,
    train_per_class: int = 40,
    test_per_class: int = 10,
    image_size: int = 24,
    seed: int = 0,
) -> CategoryManifest:
    """Write a synthetic image folder pool and its manifest.

    The category of a class sets the hue of its images, the class sets the stripe orientation and
    period. Images of the same category therefore resemble each other more than images of different
    categories, which gives the category structure the shared network can exploit.
    """
    if image_size < 8:
        raise ValueError(f"Toy images need at least 8 pixels per side, got {image_size}")
    rng = np.random.default_rng(seed)
    mapping = {}
    for category in range(num_categories):
        class_ids = []
        for class_in_category in range(classes_per_category):
            class_id = toy_class_id(category, class_in_category)
            class_ids.append(class_id)
            for side, count in ((TRAIN_SIDE, train_per_class), (TEST_SIDE, test_per_class)):
                class_dir = pool_root / side / class_id
                class_dir.mkdir(parents=True, exist_ok=True)
                for index in range(count):
                    hsv = _toy_image(category, num_categories, class_in_category, image_size, rng)
                    image = frombytes(HSV_MODE, (image_size, image_size), hsv.tobytes()).convert("RGB")
                    image.save(class_dir / f"{index:04d}.png")
        mapping[toy_category_name(category)] = class_ids

    manifest = manifest_from_mapping(mapping)
    write_manifest(manifest, pool_root / TOY_MANIFEST_NAME)
    logger.info(
        'Wrote toy pool with %d categories of %d classes to "%s"', num_categories, classes_per_category, pool_root
    )
    return manifest


def _toy_image(
    category: int, num_categories: int, class_in_category: int, image_size: int, rng: np.random.Generator
) -> np.ndarray:
    hue = (category / num_categories + rng.normal(0.0, 0.01)) % 1.0
    period = 2 + class_in_category // 2
    phase = int(rng.integers(0, period))
    coordinates = np.arange(image_size)
    stripes = ((coordinates + phase) // max(period // 2, 1)) % 2
    pattern = stripes[np.newaxis, :] if class_in_category % 2 == 0 else stripes[:, np.newaxis]
    pattern = np.broadcast_to(pattern, (image_size, image_size))

    value = np.where(pattern == 1, 220.0, 70.0) + rng.normal(0.0, 12.0, size=(image_size, image_size))
    saturation = np.full((image_size, image_size), rng.uniform(150.0, 255.0))
    hsv = np.stack([np.full((image_size, image_size), hue * 255.0), saturation, value], axis=-1)
    return np.clip(np.rint(hsv), 0, 255).astype(np.uint8)
