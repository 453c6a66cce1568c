from pathlib import Path

import numpy as np
from PIL.Image import Image
from PIL.Image import fromarray as from_array
from PIL.Image import open as open_image

RGB_MODE = "RGB"


def load_rgb_image(path: Path | str) -> Image:
    """Decode an image file into an RGB PIL image. This is the only place image files are decoded."""
    with open_image(path) as img:
        return parse_raster_image(img)


def parse_raster_image(img: Image) -> Image:
    img_rgb = img.convert(RGB_MODE)
    img_rgb.load()
    return img_rgb


def image_to_array(img: Image) -> np.ndarray:
    """H x W x 3 float32 array with values in [0, 1]."""
    return np.asarray(img, dtype=np.float32) / 255.0


def array_to_image(array: np.ndarray) -> Image:
    return from_array(np.clip(np.rint(array * 255.0), 0, 255).astype(np.uint8))
