from dataclasses import dataclass, replace
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from torchvision.datasets.folder import IMG_EXTENSIONS, has_file_allowed_extension

from multicat.data.manifest import CategoryManifest, ClassEntry
from multicat.file import TEXT_ENCODING

logger = getLogger(__name__)

TRAIN_SIDE = "train"
TEST_SIDE = "test"
SPLIT_COLUMNS = ["image", "class_index", "class_id", "category_index", "category_name", "side"]


class SamplingError(ValueError):
    """Raised when a dataset can not be drawn from a pool."""


class SplitError(ValueError):
    """Raised for invalid split construction or category operations."""


@dataclass(frozen=True)
class DatasetSpec:
    """How to draw datasets from a pool."""

    pool_root: str
    num_classes: int
    num_replicates: int
    train_per_class: int
    test_per_class: int
    seed: int

    def __post_init__(self):
        for name in ("num_classes", "num_replicates", "train_per_class", "test_per_class"):
            if getattr(self, name) < 1:
                raise SamplingError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class ImageItem:
    image: str
    class_index: int


@dataclass(frozen=True)
class DatasetSplit:
    """Resolved train/test image lists.

    Class indices are contiguous from 0 in the order of class_ids. category_of maps class index to
    category index and is None for splits without categories.
    """

    class_ids: Tuple[str, ...]
    train_items: Tuple[ImageItem, ...]
    test_items: Tuple[ImageItem, ...]
    category_of: Optional[Tuple[int, ...]] = None
    category_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        num_classes = len(self.class_ids)
        if len(set(self.class_ids)) != num_classes:
            raise SplitError("Class ids of a split must be unique")
        for item in self.train_items + self.test_items:
            if not 0 <= item.class_index < num_classes:
                raise SplitError(f'Item "{item.image}" has class index {item.class_index} outside [0, {num_classes})')
        train_images = {item.image for item in self.train_items}
        if any(item.image in train_images for item in self.test_items):
            raise SplitError("Train and test items of a split must be disjoint")
        if self.category_of is not None:
            if len(self.category_of) != num_classes:
                raise SplitError("The category map must cover every class")
            num_categories = self.num_categories
            if sorted(set(self.category_of)) != list(range(num_categories)):
                raise SplitError("Category indices must be contiguous from 0")
            if self.category_names is not None and len(self.category_names) != num_categories:
                raise SplitError("There must be one category name per category")

    @property
    def num_classes(self) -> int:
        return len(self.class_ids)

    @property
    def num_categories(self) -> int:
        if self.category_of is None:
            return 0
        return max(self.category_of) + 1 if self.category_of else 0

    @property
    def class_index(self) -> Dict[str, int]:
        return {class_id: index for index, class_id in enumerate(self.class_ids)}

    def category_name(self, category: int) -> str:
        if self.category_names is None:
            return f"group_{category}"
        return self.category_names[category]

    def with_categories(self, category_of: Sequence[int], category_names: Optional[Sequence[str]] = None):
        return replace(
            self,
            category_of=tuple(category_of),
            category_names=tuple(category_names) if category_names is not None else None,
        )


def load_pool(pool_root: Path) -> List[ClassEntry]:
    """List the classes of an image folder tree with train/<class_id>/ and test/<class_id>/ directories."""
    train_root = pool_root / TRAIN_SIDE
    test_root = pool_root / TEST_SIDE
    if not train_root.is_dir() or not test_root.is_dir():
        raise SamplingError(f'Pool "{pool_root}" needs "{TRAIN_SIDE}" and "{TEST_SIDE}" sub directories')

    entries = []
    for class_dir in sorted(path for path in train_root.iterdir() if path.is_dir()):
        entries.append(
            ClassEntry(
                class_id=class_dir.name,
                display_name=class_dir.name,
                train_images=_list_images(class_dir),
                test_images=_list_images(test_root / class_dir.name),
            )
        )
    logger.info('Found %d classes in pool "%s"', len(entries), pool_root)
    return entries


def _list_images(class_dir: Path) -> Tuple[str, ...]:
    if not class_dir.is_dir():
        return ()
    return tuple(
        str(path)
        for path in sorted(class_dir.iterdir())
        if path.is_file() and has_file_allowed_extension(path.name, IMG_EXTENSIONS)
    )


def eligible_classes(pool: Sequence[ClassEntry], train_per_class: int, test_per_class: int) -> List[ClassEntry]:
    """Classes having at least the requested number of images on both sides."""
    return [
        entry
        for entry in pool
        if len(entry.train_images) >= train_per_class and len(entry.test_images) >= test_per_class
    ]


def attach_images(manifest: CategoryManifest, pool: Sequence[ClassEntry]) -> CategoryManifest:
    """Replace the manifest's class entries by the pool entries with the same class id."""
    by_id = {entry.class_id: entry for entry in pool}
    missing = [entry.class_id for entry in manifest.class_entries() if entry.class_id not in by_id]
    if missing:
        raise SamplingError(f"Classes missing from the pool: {', '.join(missing)}")
    return CategoryManifest(
        categories=tuple(
            replace(
                category,
                classes=tuple(
                    replace(by_id[entry.class_id], display_name=entry.display_name) for entry in category.classes
                ),
            )
            for category in manifest.categories
        )
    )


def resolve_split(
    classes: Sequence[ClassEntry],
    train_per_class: int,
    test_per_class: int,
    seed: int,
    category_of: Optional[Sequence[int]] = None,
    category_names: Optional[Sequence[str]] = None,
) -> DatasetSplit:
    """Draw train_per_class/test_per_class images of every class, keeping the order of the image lists."""
    rng = np.random.default_rng(seed)
    train_items: List[ImageItem] = []
    test_items: List[ImageItem] = []
    for class_index, entry in enumerate(classes):
        train_images = _draw(rng, entry.train_images, train_per_class, entry, TRAIN_SIDE)
        test_images = _draw(rng, entry.test_images, test_per_class, entry, TEST_SIDE)
        train_items.extend(ImageItem(image, class_index) for image in train_images)
        test_items.extend(ImageItem(image, class_index) for image in test_images)
    return DatasetSplit(
        class_ids=tuple(entry.class_id for entry in classes),
        train_items=tuple(train_items),
        test_items=tuple(test_items),
        category_of=tuple(category_of) if category_of is not None else None,
        category_names=tuple(category_names) if category_names is not None else None,
    )


def _draw(rng: np.random.Generator, images: Sequence[str], count: int, entry: ClassEntry, side: str) -> List[str]:
    if len(images) < count:
        raise SamplingError(
            f'Class "{entry.class_id}" has {len(images)} {side} images, {count} are needed. '
            "Lower the per-class counts or resolve against an image folder pool."
        )
    chosen = np.sort(rng.choice(len(images), size=count, replace=False))
    return [images[index] for index in chosen]


def split_from_manifest(
    manifest: CategoryManifest, train_per_class: int, test_per_class: int, seed: int
) -> DatasetSplit:
    """Resolve a split over all manifest classes with the manifest's natural categories."""
    return resolve_split(
        manifest.class_entries(),
        train_per_class,
        test_per_class,
        seed,
        category_of=manifest.category_of(),
        category_names=manifest.category_names,
    )


def replicate_seed_sequence(seed: int, replicate: int) -> np.random.SeedSequence:
    """Sub-seed of replicate i: numpy SeedSequence with entropy (seed, i), i.e. a hash of both numbers."""
    return np.random.SeedSequence([seed, replicate])


def sample_class_subsets(pool: Sequence[ClassEntry], spec: DatasetSpec) -> List[DatasetSplit]:
    """Draw spec.num_replicates independent datasets of spec.num_classes classes from pool.

    Classes are drawn uniformly without replacement and kept in pool order. Replicate i uses the
    sub-seed of replicate_seed_sequence(spec.seed, i) for both class and image draws.
    """
    if len(pool) < spec.num_classes:
        raise SamplingError(f"Pool has {len(pool)} classes, {spec.num_classes} were requested")

    splits = []
    for replicate in range(spec.num_replicates):
        class_sequence, image_sequence = replicate_seed_sequence(spec.seed, replicate).spawn(2)
        rng = np.random.default_rng(class_sequence)
        chosen = np.sort(rng.choice(len(pool), size=spec.num_classes, replace=False))
        image_seed = int(image_sequence.generate_state(1)[0])
        splits.append(
            resolve_split([pool[index] for index in chosen], spec.train_per_class, spec.test_per_class, image_seed)
        )
    logger.debug(
        "Sampled %d datasets of %d classes from a pool of %d", spec.num_replicates, spec.num_classes, len(pool)
    )
    return splits


def random_partition(classes: Sequence[int], num_groups: int, seed: int) -> Dict[int, int]:
    """Assign every class to one of num_groups equally sized groups."""
    if num_groups < 1:
        raise SplitError(f"The number of groups must be positive, got {num_groups}")
    if len(classes) % num_groups != 0:
        raise SplitError(f"{len(classes)} classes can not be divided into {num_groups} equal groups")
    group_size = len(classes) // num_groups
    permutation = np.random.default_rng(seed).permutation(len(classes))
    return {int(classes[index]): position // group_size for position, index in enumerate(permutation)}


def split_category(split: DatasetSplit, category: int) -> DatasetSplit:
    """Restrict split to one category, re-indexing its classes contiguously in their original order."""
    if split.category_of is None:
        raise SplitError("The split has no category map")
    if not 0 <= category < split.num_categories:
        raise SplitError(f"Category {category} is outside [0, {split.num_categories})")

    members = [index for index, member_category in enumerate(split.category_of) if member_category == category]
    reindex = {old: new for new, old in enumerate(members)}

    def restrict(items: Tuple[ImageItem, ...]) -> Tuple[ImageItem, ...]:
        return tuple(ImageItem(item.image, reindex[item.class_index]) for item in items if item.class_index in reindex)

    return DatasetSplit(
        class_ids=tuple(split.class_ids[index] for index in members),
        train_items=restrict(split.train_items),
        test_items=restrict(split.test_items),
        category_of=tuple(0 for _ in members),
        category_names=(split.category_name(category),),
    )


def write_split_csv(split: DatasetSplit, path: Path) -> None:
    rows = [
        (
            item.image,
            item.class_index,
            split.class_ids[item.class_index],
            split.category_of[item.class_index] if split.category_of is not None else -1,
            split.category_name(split.category_of[item.class_index]) if split.category_of is not None else "",
            side,
        )
        for side, items in ((TRAIN_SIDE, split.train_items), (TEST_SIDE, split.test_items))
        for item in items
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=SPLIT_COLUMNS).to_csv(path, index=False, encoding=TEXT_ENCODING)


def read_split_csv(path: Path) -> DatasetSplit:
    frame = pd.read_csv(
        path, dtype={"image": str, "class_id": str, "category_name": str}, keep_default_na=False, encoding=TEXT_ENCODING
    )
    classes = frame.drop_duplicates("class_index").sort_values("class_index")
    if list(classes["class_index"]) != list(range(len(classes))):
        raise SplitError(f'Class indices in "{path}" are not contiguous from 0')
    has_categories = bool((classes["category_index"] >= 0).all())

    def items(side: str) -> Tuple[ImageItem, ...]:
        rows = frame[frame["side"] == side]
        return tuple(ImageItem(str(image), int(index)) for image, index in zip(rows["image"], rows["class_index"]))

    return DatasetSplit(
        class_ids=tuple(str(class_id) for class_id in classes["class_id"]),
        train_items=items(TRAIN_SIDE),
        test_items=items(TEST_SIDE),
        category_of=tuple(int(index) for index in classes["category_index"]) if has_categories else None,
        category_names=_category_names(classes) if has_categories else None,
    )


def _category_names(classes: pd.DataFrame) -> Tuple[str, ...]:
    categories = classes.drop_duplicates("category_index").sort_values("category_index")
    return tuple(str(name) for name in categories["category_name"])
