import math
import time
from dataclasses import dataclass
from logging import Logger
from pathlib import Path
from typing import List, Optional

import pandas as pd
import torch
from torch.optim.lr_scheduler import MultiStepLR
from torch.utils.data import DataLoader

from multicat.augmentation.color import ColorStatistics
from multicat.augmentation.transforms import TrainTransform
from multicat.data.split import DatasetSplit
from multicat.file import write_text_atomic
from multicat.labeling import LabelError, LabelScheme, encode_batch, soft_cross_entropy
from multicat.model.checkpoint import CHECKPOINT_FILENAME, save_checkpoint
from multicat.model.network import ForwardMode, ResidualNetwork, build_network, forward
from multicat.settings import HarnessSettings
from multicat.training.datasets import TrainImageDataset, epoch_generator
from multicat.training.evaluation import evaluate
from multicat.training.optimizer import RMSProp
from multicat.types import ArchitectureSpec, LabelKind, TrainConfig, ViewSpec

METRICS_FILENAME = "metrics.csv"
METRIC_COLUMNS = ["epoch", "train_loss", "test_error", "lr", "wall_seconds", "train_error"]


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite. The last checkpoint on disk stays valid."""


@dataclass(frozen=True)
class TrainingOutcome:
    network: ResidualNetwork
    scheme: LabelScheme
    metrics: pd.DataFrame
    checkpoint_path: Path


def configure_torch(settings: HarnessSettings) -> None:
    if settings.deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
        if settings.device == "cpu":
            torch.set_num_threads(1)


def milestone_epochs(config: TrainConfig) -> List[int]:
    return sorted({round(fraction * config.epochs) for fraction in config.lr_milestones if 0 < fraction < 1})


def weight_penalty(network: ResidualNetwork, weight_decay: float) -> torch.Tensor:
    """weight_decay / 2 times the squared norm of the convolution and classifier weights."""
    return 0.5 * weight_decay * sum(weight.pow(2).sum() for weight in network.decayed_weights())


def check_scheme(split: DatasetSplit, scheme: LabelScheme) -> None:
    if scheme.num_classes != split.num_classes:
        raise LabelError(f"The label scheme has {scheme.num_classes} classes, the split {split.num_classes}")
    if scheme.kind == LabelKind.CLASS_CATEGORY and scheme.category_of != split.category_of:
        raise LabelError("The category map of the label scheme does not match the split")


def train(
    split: DatasetSplit,
    scheme: LabelScheme,
    spec: ArchitectureSpec,
    config: TrainConfig,
    run_dir: Path,
    logger: Logger,
    settings: HarnessSettings,
    statistics: Optional[ColorStatistics] = None,
) -> TrainingOutcome:
    """Train a network on the train side of split and write metrics.csv and checkpoint.pt into run_dir.

    The network gets scheme.width outputs; everything else comes from spec. Results are reproducible
    for equal inputs on a deterministic single threaded CPU backend, wall_seconds aside.
    """
    check_scheme(split, scheme)
    configure_torch(settings)
    device = settings.device
    network = build_network(spec.with_output_width(scheme.width), config.seed).to(device)
    optimizer = RMSProp(
        network.named_parameters(), lr=config.learning_rate, decay=config.rmsprop_decay, epsilon=config.rmsprop_epsilon
    )
    scheduler = MultiStepLR(optimizer, milestones=milestone_epochs(config), gamma=config.lr_decay_factor)
    dataset = TrainImageDataset(split.train_items, TrainTransform(config.augment, statistics), config.seed)
    checkpoint_path = run_dir / CHECKPOINT_FILENAME
    metrics_path = run_dir / METRICS_FILENAME
    rows = []

    logger.info(
        "Training %d classes (%d outputs) on %d images for %d epochs",
        split.num_classes,
        scheme.width,
        len(dataset),
        config.epochs,
    )
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        dataset.set_epoch(epoch)
        loader = DataLoader(
            dataset,
            batch_size=config.batch_size,
            shuffle=True,
            generator=epoch_generator(config.seed, epoch),
            num_workers=settings.num_workers,
        )
        lr = optimizer.param_groups[0]["lr"]
        loss_sum = 0.0
        wrong = 0
        for images, labels in loader:
            images, labels = images.to(device), labels.to(device)
            logits = forward(network, images, ForwardMode.TRAIN)
            data_loss = soft_cross_entropy(logits, encode_batch(scheme, labels.cpu()).to(device))
            loss = data_loss + weight_penalty(network, config.weight_decay)
            if not math.isfinite(loss.item()):
                raise TrainingDivergedError(
                    f"The loss became {loss.item()} in epoch {epoch}; the checkpoint of epoch {epoch - 1} is kept"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += data_loss.item() * len(labels)
            with torch.no_grad():
                predicted = torch.argmax(logits[:, scheme.class_offset :], dim=1)
            wrong += int((predicted != labels).sum())
        scheduler.step()

        test_error = float("nan")
        if config.eval_every_epoch:
            test_error = evaluate(
                network, split.test_items, scheme, ViewSpec.center_only(), device, config.batch_size
            ).error
        row = {
            "epoch": epoch,
            "train_loss": loss_sum / len(dataset),
            "test_error": test_error,
            "lr": lr,
            "wall_seconds": time.perf_counter() - started,
            "train_error": wrong / len(dataset),
        }
        rows.append(row)
        logger.info(
            "Epoch %d: train loss %.4f, test error %.4f, lr %g", epoch, row["train_loss"], test_error, lr
        )
        save_checkpoint(checkpoint_path, network, config.seed, scheme, epoch)
        write_text_atomic(metrics_path, pd.DataFrame(rows, columns=METRIC_COLUMNS).to_csv(index=False))

    return TrainingOutcome(
        network=network,
        scheme=scheme,
        metrics=pd.DataFrame(rows, columns=METRIC_COLUMNS),
        checkpoint_path=checkpoint_path,
    )
