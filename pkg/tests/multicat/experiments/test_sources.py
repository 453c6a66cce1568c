import numpy as np
from pytest import raises

from multicat.data.split import SamplingError
from multicat.experiments.sources import (
    GROUPING_STREAM,
    IMAGES_STREAM,
    color_statistics_for,
    derive_seed,
    grouped_split,
    open_sources,
    scaling_splits,
)
from multicat.types import Grouping

from tests.conftest import TOY_CATEGORIES, TOY_CLASSES_PER_CATEGORY


def test_derive_seed():
    assert derive_seed(3, IMAGES_STREAM) == derive_seed(3, IMAGES_STREAM)
    assert derive_seed(3, IMAGES_STREAM) != derive_seed(3, GROUPING_STREAM)
    assert derive_seed(3, IMAGES_STREAM) != derive_seed(4, IMAGES_STREAM)
    assert 0 <= derive_seed(1, 2, 3) < 2**32


def test_sources_attach_the_pool(toy_config):
    sources = open_sources(toy_config)
    assert sources.manifest.num_categories == TOY_CATEGORIES
    assert len(sources.pool) == TOY_CATEGORIES * TOY_CLASSES_PER_CATEGORY
    assert len(sources.manifest_hash) == 64


def test_natural_and_random_grouping_draw_the_same_images(toy_config):
    sources = open_sources(toy_config)
    natural = grouped_split(toy_config, sources)
    random_config = toy_config.model_copy(
        update={"dataset": toy_config.dataset.model_copy(update={"grouping": Grouping.RANDOM})}
    )
    randomized = grouped_split(random_config, sources)

    assert natural.class_ids == randomized.class_ids
    assert natural.train_items == randomized.train_items
    assert natural.test_items == randomized.test_items
    assert natural.category_of == (0, 0, 0, 1, 1, 1)
    assert sorted(randomized.category_of) == [0, 0, 0, 1, 1, 1]
    assert len(natural.train_items) == 6 * 4
    assert len(natural.test_items) == 6 * 2
    assert grouped_split(random_config, sources) == randomized


def test_scaling_splits(toy_config):
    sources = open_sources(toy_config)
    splits = scaling_splits(toy_config, sources, 4, 2)
    assert len(splits) == 2
    assert all(split.num_classes == 4 and len(split.train_items) == 16 for split in splits)
    assert splits == scaling_splits(toy_config, sources, 4, 2)
    with raises(SamplingError):
        scaling_splits(toy_config, sources, 7, 1)


def test_sampling_needs_a_pool(config_data):
    sources = open_sources(config_data)
    assert sources.pool is None
    with raises(SamplingError, match="pool_root"):
        scaling_splits(config_data, sources, 10, 1)
    with raises(SamplingError):
        grouped_split(config_data, sources)


def test_color_statistics_are_cached(toy_config, path_work):
    split = grouped_split(toy_config, open_sources(toy_config))
    cache_path = path_work / "color_statistics.txt"
    computed = color_statistics_for(split, cache_path, toy_config, seed=1)
    assert cache_path.is_file()
    cached = color_statistics_for(split, cache_path, toy_config, seed=1)
    assert np.array_equal(cached.eigenvalues, computed.eigenvalues)
    assert np.array_equal(cached.eigenvectors, computed.eigenvectors)

    no_jitter = toy_config.model_copy(
        update={
            "train": toy_config.train.model_copy(
                update={"augment": toy_config.train.augment.model_copy(update={"color_jitter_strength": 0.0})}
            )
        }
    )
    assert color_statistics_for(split, path_work / "unused.txt", no_jitter, seed=1) is None
    assert not (path_work / "unused.txt").exists()
