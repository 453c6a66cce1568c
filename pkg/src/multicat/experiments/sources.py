from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from multicat.augmentation.color import (
    ColorStatistics,
    compute_color_statistics,
    load_color_statistics,
    save_color_statistics,
)
from multicat.data.manifest import CategoryManifest, ClassEntry, load_manifest, manifest_hash, resolve_manifest_path
from multicat.data.split import (
    DatasetSpec,
    DatasetSplit,
    SamplingError,
    attach_images,
    eligible_classes,
    load_pool,
    random_partition,
    resolve_split,
    sample_class_subsets,
    split_from_manifest,
)
from multicat.types import ExperimentConfig, Grouping

logger = getLogger(__name__)

# Stream tags keep the seeds of independent draws apart
IMAGES_STREAM = 1
GROUPING_STREAM = 2
TRAINING_STREAM = 3
SCALING_STREAM = 4
STATISTICS_STREAM = 5


def derive_seed(*parts: int) -> int:
    """A 32 bit seed hashed from the given integers by numpy's SeedSequence."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class DataSources:
    """The manifest of an experiment and, if configured, the image folder pool it is resolved against."""

    manifest: CategoryManifest
    manifest_path: Path
    manifest_hash: str
    pool_root: Optional[Path] = None
    pool: Optional[Sequence[ClassEntry]] = None

    def required_pool(self) -> Sequence[ClassEntry]:
        if self.pool is None:
            raise SamplingError("Sampling classes needs an image folder pool; set dataset.pool_root")
        return self.pool


def open_sources(config: ExperimentConfig) -> DataSources:
    """Load the manifest and attach the pool images to it.

    A relative pool root is taken relative to the working directory, a relative manifest path
    relative to the pool root.
    """
    dataset = config.dataset
    pool_root = Path(dataset.pool_root).resolve() if dataset.pool_root else None
    manifest_path = resolve_manifest_path(dataset.manifest, pool_root)
    manifest = load_manifest(manifest_path)
    pool = None
    if pool_root is not None:
        pool = load_pool(pool_root)
        manifest = attach_images(manifest, pool)
    return DataSources(
        manifest=manifest,
        manifest_path=manifest_path,
        manifest_hash=manifest_hash(manifest_path),
        pool_root=pool_root,
        pool=pool,
    )


def grouped_split(config: ExperimentConfig, sources: DataSources) -> DatasetSplit:
    """The split of the shared and label studies with its natural or random category map.

    Natural and random grouping of the manifest classes draw the same images; only the category map differs.
    """
    dataset = config.dataset
    image_seed = derive_seed(config.seed, IMAGES_STREAM)
    if dataset.grouping == Grouping.NATURAL:
        return split_from_manifest(sources.manifest, dataset.train_per_class, dataset.test_per_class, image_seed)

    grouping_seed = derive_seed(config.seed, GROUPING_STREAM)
    num_groups = dataset.random_groups or sources.manifest.num_categories
    if dataset.random_from_pool:
        pool = eligible_classes(sources.required_pool(), dataset.train_per_class, dataset.test_per_class)
        spec = DatasetSpec(
            pool_root=str(sources.pool_root),
            num_classes=sources.manifest.num_classes,
            num_replicates=1,
            train_per_class=dataset.train_per_class,
            test_per_class=dataset.test_per_class,
            seed=grouping_seed,
        )
        split = sample_class_subsets(pool, spec)[0]
    else:
        split = resolve_split(
            sources.manifest.class_entries(), dataset.train_per_class, dataset.test_per_class, image_seed
        )
    groups = random_partition(range(split.num_classes), num_groups, grouping_seed)
    logger.info("Divided %d classes randomly into %d groups", split.num_classes, num_groups)
    return split.with_categories([groups[class_index] for class_index in range(split.num_classes)])


def scaling_splits(config: ExperimentConfig, sources: DataSources, size: int, replicates: int) -> List[DatasetSplit]:
    """Independent datasets of size classes drawn from the pool classes with enough images."""
    dataset = config.dataset
    pool = eligible_classes(sources.required_pool(), dataset.train_per_class, dataset.test_per_class)
    spec = DatasetSpec(
        pool_root=str(sources.pool_root),
        num_classes=size,
        num_replicates=replicates,
        train_per_class=dataset.train_per_class,
        test_per_class=dataset.test_per_class,
        seed=derive_seed(config.seed, SCALING_STREAM, size),
    )
    return sample_class_subsets(pool, spec)


def color_statistics_for(
    split: DatasetSplit, cache_path: Path, config: ExperimentConfig, seed: int
) -> Optional[ColorStatistics]:
    """Color statistics of the split's training images, computed once and cached at cache_path."""
    if config.train.augment.color_jitter_strength == 0:
        return None
    if cache_path.is_file():
        return load_color_statistics(cache_path)
    statistics = compute_color_statistics(
        [item.image for item in split.train_items],
        config.dataset.color_statistics_max_pixels,
        derive_seed(seed, STATISTICS_STREAM),
    )
    save_color_statistics(statistics, cache_path)
    return statistics
