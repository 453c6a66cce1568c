from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from torch.utils.data import DataLoader

from multicat.data.split import ImageItem
from multicat.file import write_text_atomic
from multicat.labeling import LabelScheme, decode_probabilities
from multicat.model.checkpoint import CheckpointError, load_checkpoint
from multicat.model.network import ForwardMode, ResidualNetwork, forward
from multicat.training.datasets import ViewImageDataset
from multicat.types import ViewSpec

PREDICTIONS_FILENAME = "predictions.csv"


@dataclass(frozen=True)
class Evaluation:
    """Per-image truth and prediction of a test side, in item order."""

    images: Sequence[str]
    truth: np.ndarray
    predictions: np.ndarray
    probabilities: np.ndarray

    @property
    def wrong(self) -> int:
        return int(np.count_nonzero(self.truth != self.predictions))

    @property
    def total(self) -> int:
        return len(self.truth)

    @property
    def error(self) -> float:
        return self.wrong / self.total if self.total else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"image": list(self.images), "class_index": self.truth, "predicted": self.predictions})

    def write_predictions(self, path: Path) -> None:
        write_text_atomic(path, self.to_frame().to_csv(index=False))


def evaluate(
    network: ResidualNetwork,
    items: Sequence[ImageItem],
    scheme: LabelScheme,
    view_spec: ViewSpec,
    device: str = "cpu",
    batch_size: int = 128,
    num_workers: int = 0,
) -> Evaluation:
    """Average the softmax outputs over the views of every test image and decode the average."""
    if network.spec.output_width != scheme.width:
        raise CheckpointError(
            f"The network has {network.spec.output_width} outputs, the label scheme needs {scheme.width}"
        )
    dataset = ViewImageDataset(items, view_spec, network.spec.input_size)
    loader = DataLoader(
        dataset, batch_size=max(1, batch_size // dataset.view_count), shuffle=False, num_workers=num_workers
    )

    chunks = []
    truth = []
    with torch.no_grad():
        for views, labels in loader:
            images, view_count = views.shape[0], views.shape[1]
            logits = forward(network, views.flatten(0, 1).to(device), ForwardMode.EVAL)
            probabilities = torch.softmax(logits.double(), dim=-1).view(images, view_count, -1).mean(dim=1)
            chunks.append(probabilities.cpu())
            truth.append(labels)

    if chunks:
        probabilities = torch.cat(chunks)
        predictions = decode_probabilities(scheme, probabilities).numpy()
    else:
        probabilities = torch.zeros(0, scheme.width, dtype=torch.float64)
        predictions = np.zeros(0, dtype=np.int64)
    return Evaluation(
        images=[item.image for item in items],
        truth=torch.cat(truth).numpy() if truth else np.zeros(0, dtype=np.int64),
        predictions=predictions,
        probabilities=probabilities.numpy(),
    )


def evaluate_checkpoint(
    path: Path,
    items: Sequence[ImageItem],
    view_spec: ViewSpec,
    num_classes: int,
    device: str = "cpu",
    batch_size: int = 128,
    num_workers: int = 0,
) -> Tuple[LabelScheme, Evaluation]:
    """Evaluate a stored network on items of a split with num_classes classes."""
    checkpoint = load_checkpoint(path, device)
    scheme = checkpoint.label_scheme
    if scheme is None:
        raise CheckpointError(f'Checkpoint "{path}" stores no label scheme')
    if scheme.num_classes != num_classes:
        raise CheckpointError(f"The checkpoint predicts {scheme.num_classes} classes, the split has {num_classes}")
    return scheme, evaluate(checkpoint.network, items, scheme, view_spec, device, batch_size, num_workers)
