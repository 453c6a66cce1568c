from typing import Optional

import numpy as np
from PIL.Image import Image
from torchvision.transforms.functional import InterpolationMode, resized_crop

from multicat.augmentation.color import ColorStatistics, color_augment
from multicat.augmentation.crop import sample_crop
from multicat.data.images import image_to_array
from multicat.types import AugmentConfig


class TrainTransform:
    """Random crop and resize, horizontal flip and PCA lighting, in this order."""

    def __init__(self, config: AugmentConfig, statistics: Optional[ColorStatistics]):
        self._config = config
        self._statistics = statistics

    def __call__(self, image: Image, rng: np.random.Generator) -> np.ndarray:
        config = self._config
        rect = sample_crop(image.width, image.height, config, rng)
        cropped = resized_crop(
            image,
            top=rect.y,
            left=rect.x,
            height=rect.height,
            width=rect.width,
            size=[config.output_size, config.output_size],
            interpolation=InterpolationMode.BILINEAR,
        )
        array = image_to_array(cropped)
        if config.horizontal_flip and rng.random() < 0.5:
            array = np.ascontiguousarray(array[:, ::-1])
        return color_augment(array, config.color_jitter_strength, rng, self._statistics)
