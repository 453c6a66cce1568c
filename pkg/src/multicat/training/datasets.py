from typing import Callable, Sequence, Tuple

import numpy as np
import torch
from PIL.Image import Image
from torch import Tensor
from torch.utils.data import Dataset

from multicat.augmentation.views import multi_crop_views
from multicat.data.images import load_rgb_image
from multicat.data.split import ImageItem
from multicat.types import ViewSpec

ImageTransform = Callable[[Image, np.random.Generator], np.ndarray]


def item_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Random stream of one item in one epoch, independent of worker assignment."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, index]))


def to_chw_tensor(array: np.ndarray) -> Tensor:
    return torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1), dtype=np.float32))


class TrainImageDataset(Dataset[Tuple[Tensor, int]]):
    """Augmented training items; call set_epoch before iterating an epoch."""

    def __init__(self, items: Sequence[ImageItem], transform: ImageTransform, seed: int):
        self._items = list(items)
        self._transform = transform
        self._seed = seed
        self._epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self._epoch = epoch

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Tuple[Tensor, int]:
        item = self._items[index]
        rng = item_rng(self._seed, self._epoch, index)
        return to_chw_tensor(self._transform(load_rgb_image(item.image), rng)), item.class_index


class ViewImageDataset(Dataset[Tuple[Tensor, int]]):
    """Test items as V x 3 x S x S stacks of their evaluation views."""

    def __init__(self, items: Sequence[ImageItem], view_spec: ViewSpec, output_size: int):
        self._items = list(items)
        self._view_spec = view_spec
        self._output_size = output_size

    @property
    def view_count(self) -> int:
        return self._view_spec.view_count

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Tuple[Tensor, int]:
        item = self._items[index]
        views = multi_crop_views(load_rgb_image(item.image), self._view_spec, self._output_size)
        return torch.stack([to_chw_tensor(view) for view in views]), item.class_index


def epoch_generator(seed: int, epoch: int) -> torch.Generator:
    """Generator driving the shuffle order of one epoch."""
    state = np.random.SeedSequence([seed, epoch]).generate_state(1)
    return torch.Generator().manual_seed(int(state[0]))
