import numpy as np
from pytest import raises

from multicat.data.images import image_to_array, load_rgb_image
from multicat.data.manifest import load_manifest
from multicat.data.synthetic import TOY_MANIFEST_NAME, make_toy_pool, toy_class_id


def test_toy_pool_layout(path_toy_pool):
    manifest = load_manifest(path_toy_pool / TOY_MANIFEST_NAME)
    assert manifest.category_names == ["hue_00", "hue_01"]
    assert manifest.category_by_name("hue_01").classes[0].class_id == toy_class_id(1, 0)
    assert len(list((path_toy_pool / "train" / "c00_00").glob("*.png"))) == 6
    assert len(list((path_toy_pool / "test" / "c01_02").glob("*.png"))) == 3

    image = load_rgb_image(path_toy_pool / "train" / "c00_00" / "0000.png")
    assert image.mode == "RGB"
    assert image.size == (16, 16)


def test_categories_differ_in_color(path_toy_pool):
    def mean_color(class_id: str) -> np.ndarray:
        images = sorted((path_toy_pool / "train" / class_id).glob("*.png"))
        return np.mean([image_to_array(load_rgb_image(path)).mean(axis=(0, 1)) for path in images], axis=0)

    same_category = np.abs(mean_color("c00_00") - mean_color("c00_01")).sum()
    other_category = np.abs(mean_color("c00_00") - mean_color("c01_00")).sum()
    assert same_category < other_category


def test_toy_pool_is_reproducible(path_work):
    make_toy_pool(path_work / "a", num_categories=1, classes_per_category=2, train_per_class=2, test_per_class=1)
    make_toy_pool(path_work / "b", num_categories=1, classes_per_category=2, train_per_class=2, test_per_class=1)
    for side, class_id, name in (("train", "c00_01", "0001.png"), ("test", "c00_00", "0000.png")):
        a = image_to_array(load_rgb_image(path_work / "a" / side / class_id / name))
        b = image_to_array(load_rgb_image(path_work / "b" / side / class_id / name))
        assert np.array_equal(a, b)


def test_toy_pool_rejects_tiny_images(path_work):
    with raises(ValueError):
        make_toy_pool(path_work, image_size=4)
