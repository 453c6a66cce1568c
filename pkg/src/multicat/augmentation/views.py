from typing import List

import numpy as np
from PIL.Image import Image
from torchvision.transforms.functional import resize

from multicat.augmentation.crop import CropRect, center_crop_rect
from multicat.data.images import image_to_array
from multicat.types import CropPosition, ViewSpec


def position_rect(position: CropPosition, image_width: int, image_height: int, size: int) -> CropRect:
    if position == CropPosition.CENTER:
        return center_crop_rect(image_width, image_height, size, size)
    right = image_width - size
    bottom = image_height - size
    if right < 0 or bottom < 0:
        raise ValueError(f"A {size}x{size} crop does not fit into a {image_width}x{image_height} image")
    x = 0 if position in (CropPosition.TOP_LEFT, CropPosition.BOTTOM_LEFT) else right
    y = 0 if position in (CropPosition.TOP_LEFT, CropPosition.TOP_RIGHT) else bottom
    return CropRect(x, y, size, size)


def multi_crop_views(image: Image, view_spec: ViewSpec, output_size: int) -> List[np.ndarray]:
    """Deterministic evaluation views as H x W x 3 arrays in [0, 1].

    For every scale the shorter image side is resized to round(scale * output_size); one crop is taken
    at each position, followed by its mirror when view_spec.mirror is set. Views are ordered by scale,
    then position, then mirror.
    """
    views = []
    for scale in view_spec.scales:
        resized = resize(image, round(scale * output_size))
        for position in view_spec.positions:
            rect = position_rect(position, resized.width, resized.height, output_size)
            view = image_to_array(resized.crop(rect.box))
            views.append(view)
            if view_spec.mirror:
                views.append(np.ascontiguousarray(view[:, ::-1]))
    return views


def center_view(image: Image, output_size: int) -> np.ndarray:
    return multi_crop_views(image, ViewSpec.center_only(), output_size)[0]
