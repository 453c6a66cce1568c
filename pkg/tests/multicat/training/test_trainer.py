import pandas as pd
import torch
from pytest import fixture, mark, raises

from multicat.augmentation.color import compute_color_statistics
from multicat.data.manifest import load_manifest
from multicat.data.split import DatasetSplit, attach_images, load_pool, split_from_manifest
from multicat.data.synthetic import TOY_MANIFEST_NAME, make_toy_pool
from multicat.labeling import LabelError, LabelScheme
from multicat.model.checkpoint import CHECKPOINT_FILENAME, load_checkpoint
from multicat.model.network import build_network
from multicat.training.trainer import (
    METRIC_COLUMNS,
    METRICS_FILENAME,
    milestone_epochs,
    train,
    weight_penalty,
)
from multicat.types import ArchitectureSpec, AugmentConfig, LabelConfig, LabelKind, TrainConfig, ViewSpec


@fixture
def toy_split(path_toy_pool) -> DatasetSplit:
    manifest = attach_images(load_manifest(path_toy_pool / TOY_MANIFEST_NAME), load_pool(path_toy_pool))
    return split_from_manifest(manifest, 4, 2, seed=0)


def _train(split, label, config, run_dir, logger, settings):
    statistics = compute_color_statistics([item.image for item in split.train_items], 5_000, seed=0)
    scheme = LabelScheme.for_split(split, label)
    spec = ArchitectureSpec.tiny(output_width=1, input_size=16)
    return train(split, scheme, spec, config, run_dir, logger, settings, statistics)


def test_training_writes_metrics_and_checkpoint(toy_split, toy_config, path_work, logger, settings):
    label = LabelConfig(kind=LabelKind.CLASS_CATEGORY)
    outcome = _train(toy_split, label, toy_config.train, path_work, logger, settings)

    assert outcome.network.spec.output_width == 8
    assert list(outcome.metrics.columns) == METRIC_COLUMNS
    assert outcome.metrics["epoch"].tolist() == [1, 2]
    assert outcome.metrics["test_error"].between(0.0, 1.0).all()
    assert outcome.metrics["train_error"].between(0.0, 1.0).all()
    assert (path_work / METRICS_FILENAME).is_file()
    assert pd.read_csv(path_work / METRICS_FILENAME)["epoch"].tolist() == [1, 2]

    checkpoint = load_checkpoint(path_work / CHECKPOINT_FILENAME)
    assert checkpoint.epoch == 2
    assert checkpoint.label_scheme == outcome.scheme
    assert checkpoint.seed == toy_config.train.seed


def test_training_is_reproducible(toy_split, toy_config, path_work, logger, settings):
    label = LabelConfig()
    first = _train(toy_split, label, toy_config.train, path_work / "first", logger, settings)
    second = _train(toy_split, label, toy_config.train, path_work / "second", logger, settings)

    columns = [column for column in METRIC_COLUMNS if column != "wall_seconds"]
    pd.testing.assert_frame_equal(first.metrics[columns], second.metrics[columns])
    first_state = first.network.state_dict()
    second_state = second.network.state_dict()
    assert all(torch.equal(first_state[name], second_state[name]) for name in first_state)


def test_scheme_must_match_split(toy_split, toy_config, path_work, logger, settings):
    scheme = LabelScheme(kind=LabelKind.CLASS_ONLY, num_classes=5)
    with raises(LabelError):
        train(toy_split, scheme, ArchitectureSpec.tiny(5), toy_config.train, path_work, logger, settings)


def test_milestone_epochs():
    assert milestone_epochs(TrainConfig(epochs=90)) == [45, 68]
    assert milestone_epochs(TrainConfig(epochs=4, lr_milestones=[0.5, 0.5, 1.0])) == [2]


def test_weight_penalty():
    network = build_network(ArchitectureSpec.tiny(3), seed=0)
    expected = 0.5 * 1e-4 * sum(
        module.weight.pow(2).sum()
        for module in network.modules()
        if isinstance(module, (torch.nn.Conv2d, torch.nn.Linear))
    )
    assert torch.isclose(weight_penalty(network, 1e-4), expected)
    assert weight_penalty(network, 0.0).item() == 0.0


@mark.slow
def test_tiny_network_fits_two_classes(path_work, logger, settings):
    pool_root = path_work / "pool"
    manifest = make_toy_pool(
        pool_root, num_categories=2, classes_per_category=1, train_per_class=32, test_per_class=4, image_size=16
    )
    split = split_from_manifest(attach_images(manifest, load_pool(pool_root)), 32, 4, seed=0)
    config = TrainConfig(
        learning_rate=0.003,
        batch_size=16,
        epochs=50,
        eval_every_epoch=False,
        augment=AugmentConfig(output_size=16, min_area_fraction=0.35, color_jitter_strength=0.0),
        views=ViewSpec.center_only(),
    )
    scheme = LabelScheme.for_split(split, LabelConfig())
    outcome = train(split, scheme, ArchitectureSpec.tiny(2), config, path_work / "run", logger, settings)
    assert outcome.metrics["train_error"].min() <= 0.05
