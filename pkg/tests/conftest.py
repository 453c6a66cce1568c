from logging import getLogger
from pathlib import Path

from pytest import fixture

from multicat.data.synthetic import make_toy_pool
from multicat.experiments.records import ExperimentKind
from multicat.experiments.store import ResultsStore
from multicat.settings import HarnessSettings
from multicat.taskcontext import TaskContext
from multicat.taskcontextimpl import TaskContextImpl
from multicat.types import (
    ArchitectureSpec,
    AugmentConfig,
    CropPosition,
    DatasetConfig,
    ExperimentConfig,
    TrainConfig,
    ViewSpec,
)

TESTS_ROOT_PATH = Path(__file__).parent.absolute()

TOY_CATEGORIES = 2
TOY_CLASSES_PER_CATEGORY = 3
TOY_IMAGE_SIZE = 16


@fixture
def path_work(tmp_path):
    """The working directory of a test. To review the results in a directory, change this to:

    Example:
        path = TESTS_ROOT_PATH / "work"
        if path.exists() and path.is_dir():
            shutil.rmtree(path)
        path.mkdir()
        return path
    """
    return tmp_path


@fixture
def path_data_manifest_csv():
    return TESTS_ROOT_PATH / "data/manifest.csv"


@fixture
def path_data_manifest_duplicate_csv():
    return TESTS_ROOT_PATH / "data/manifest_duplicate.csv"


@fixture
def path_data_manifest_empty_category_csv():
    return TESTS_ROOT_PATH / "data/manifest_empty_category.csv"


@fixture
def path_data_config_json():
    return TESTS_ROOT_PATH / "data/config.json"


@fixture(scope="session")
def path_toy_pool(tmp_path_factory) -> Path:
    """Two categories of three classes, six train and three test images per class."""
    pool_root = tmp_path_factory.mktemp("toy_pool")
    make_toy_pool(
        pool_root,
        num_categories=TOY_CATEGORIES,
        classes_per_category=TOY_CLASSES_PER_CATEGORY,
        train_per_class=6,
        test_per_class=3,
        image_size=TOY_IMAGE_SIZE,
        seed=0,
    )
    return pool_root


@fixture(scope="session")
def config_data() -> ExperimentConfig:
    """Small experiment without an image pool; runs resolve against the builtin manifest only."""
    return ExperimentConfig(
        architecture=ArchitectureSpec.tiny(output_width=6, input_size=TOY_IMAGE_SIZE),
        train=TrainConfig(epochs=1, batch_size=8, augment=AugmentConfig(output_size=TOY_IMAGE_SIZE)),
    )


@fixture(scope="session")
def toy_config(path_toy_pool) -> ExperimentConfig:
    return ExperimentConfig(
        seed=3,
        dataset=DatasetConfig(
            pool_root=str(path_toy_pool),
            manifest="manifest.csv",
            train_per_class=4,
            test_per_class=2,
            scaling_sizes=[2, 4],
            scaling_replicates=[2, 1],
            color_statistics_max_pixels=5_000,
        ),
        architecture=ArchitectureSpec.tiny(output_width=6, input_size=TOY_IMAGE_SIZE),
        train=TrainConfig(
            learning_rate=0.003,
            batch_size=8,
            epochs=2,
            augment=AugmentConfig(output_size=TOY_IMAGE_SIZE, min_area_fraction=0.35),
            views=ViewSpec(scales=[1.0, 1.25], positions=[CropPosition.CENTER, CropPosition.TOP_LEFT]),
        ),
    )


@fixture(scope="session")
def settings() -> HarnessSettings:
    return HarnessSettings(device="cpu", num_workers=0, deterministic=True, max_parallel_runs=1)


@fixture(scope="session")
def logger():
    return getLogger("multicat.test")


@fixture
def ctx(path_work, config_data, settings, logger) -> TaskContext:
    logger.info("Creating test TaskContext with working directory '%s'", path_work.as_posix())
    store = ResultsStore(path_work, ExperimentKind.TRAIN, config_data)
    store.open(resume=False)
    return TaskContextImpl(config_data, settings, logger, store)
