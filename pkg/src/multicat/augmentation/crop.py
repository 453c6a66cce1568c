import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from multicat.types import AreaReference, AugmentConfig

MIN_IMAGE_SIDE = 8


@dataclass(frozen=True)
class CropRect:
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"Crop offsets must not be negative, got ({self.x}, {self.y})")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Crop dimensions must be positive, got {self.width}x{self.height}")

    def fits(self, image_width: int, image_height: int) -> bool:
        return self.x + self.width <= image_width and self.y + self.height <= image_height

    @property
    def box(self) -> tuple[int, int, int, int]:
        """(left, upper, right, lower) as PIL expects it."""
        return self.x, self.y, self.x + self.width, self.y + self.height


def sample_crop(
    image_width: int,
    image_height: int,
    config: AugmentConfig,
    rng: np.random.Generator,
    area_fraction: Optional[float] = None,
    aspect: Optional[float] = None,
) -> CropRect:
    """Draw a random crop with an area fraction of the reference area and a log-uniform aspect ratio.

    The reference area is the largest inscribed square by default. Draws that do not fit into the image
    are retried config.max_crop_attempts times before falling back to the centered max-square crop.
    area_fraction and aspect replace the respective draw when given; offsets are always drawn.
    """
    if image_width < MIN_IMAGE_SIDE or image_height < MIN_IMAGE_SIDE:
        raise ValueError(f"Images need at least {MIN_IMAGE_SIDE} pixels per side, got {image_width}x{image_height}")

    side = min(image_width, image_height)
    if config.area_reference == AreaReference.MAX_SQUARE:
        reference_area = side * side
    else:
        reference_area = image_width * image_height
    log_aspect_range = (math.log(config.min_aspect), math.log(config.max_aspect))

    for _ in range(config.max_crop_attempts):
        fraction = (
            area_fraction
            if area_fraction is not None
            else rng.uniform(config.min_area_fraction, config.max_area_fraction)
        )
        ratio = aspect if aspect is not None else math.exp(rng.uniform(*log_aspect_range))
        area = fraction * reference_area
        width = max(1, round(math.sqrt(area * ratio)))
        height = max(1, round(math.sqrt(area / ratio)))
        if width <= image_width and height <= image_height:
            x = int(rng.integers(0, image_width - width + 1))
            y = int(rng.integers(0, image_height - height + 1))
            return CropRect(x, y, width, height)

    return center_crop_rect(image_width, image_height, side, side)


def center_crop_rect(image_width: int, image_height: int, width: int, height: int) -> CropRect:
    if width > image_width or height > image_height:
        raise ValueError(f"A {width}x{height} crop does not fit into a {image_width}x{image_height} image")
    return CropRect((image_width - width) // 2, (image_height - height) // 2, width, height)
