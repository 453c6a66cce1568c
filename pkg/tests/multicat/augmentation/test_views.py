import numpy as np
from PIL.Image import Image
from pytest import raises

from multicat.augmentation.crop import CropRect
from multicat.augmentation.transforms import TrainTransform
from multicat.augmentation.views import center_view, multi_crop_views, position_rect
from multicat.data.images import array_to_image
from multicat.types import AugmentConfig, CropPosition, ViewSpec


def _gradient_image(width: int, height: int) -> Image:
    xs, ys = np.meshgrid(np.linspace(0.0, 1.0, width), np.linspace(0.0, 1.0, height))
    return array_to_image(np.stack([xs, ys, np.full_like(xs, 0.5)], axis=-1))


def test_default_view_count():
    assert ViewSpec().view_count == 20
    assert ViewSpec.center_only().view_count == 1
    views = multi_crop_views(_gradient_image(40, 30), ViewSpec(scales=[1.0, 1.25]), 16)
    assert len(views) == 20
    assert all(view.shape == (16, 16, 3) for view in views)


def test_views_are_ordered_with_mirrors():
    spec = ViewSpec(scales=[1.0], positions=[CropPosition.TOP_LEFT, CropPosition.BOTTOM_RIGHT], mirror=True)
    views = multi_crop_views(_gradient_image(32, 16), spec, 16)
    assert len(views) == 4
    top_left, top_left_mirror, bottom_right, bottom_right_mirror = views
    assert np.array_equal(top_left_mirror, top_left[:, ::-1])
    assert np.array_equal(bottom_right_mirror, bottom_right[:, ::-1])
    # The red channel grows from left to right
    assert top_left[:, :, 0].mean() < bottom_right[:, :, 0].mean()


def test_views_are_deterministic():
    image = _gradient_image(50, 37)
    first = multi_crop_views(image, ViewSpec(), 24)
    second = multi_crop_views(image, ViewSpec(), 24)
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
    assert np.array_equal(center_view(image, 24), multi_crop_views(image, ViewSpec.center_only(), 24)[0])


def test_position_rect():
    assert position_rect(CropPosition.TOP_RIGHT, 30, 20, 10) == CropRect(20, 0, 10, 10)
    assert position_rect(CropPosition.BOTTOM_LEFT, 30, 20, 10) == CropRect(0, 10, 10, 10)
    assert position_rect(CropPosition.CENTER, 30, 20, 10) == CropRect(10, 5, 10, 10)
    with raises(ValueError):
        position_rect(CropPosition.TOP_LEFT, 30, 8, 10)


def test_view_scales_below_one_are_rejected():
    with raises(ValueError):
        ViewSpec(scales=[0.9])


def test_train_transform_is_reproducible():
    transform = TrainTransform(AugmentConfig(output_size=16, color_jitter_strength=0.0), None)
    image = _gradient_image(40, 30)
    first = transform(image, np.random.default_rng(5))
    second = transform(image, np.random.default_rng(5))
    assert first.shape == (16, 16, 3)
    assert first.dtype == np.float32
    assert np.array_equal(first, second)
    assert 0.0 <= first.min() and first.max() <= 1.0
