from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Optional

import torch
from pydantic import ValidationError

from multicat.labeling import LabelScheme
from multicat.model.network import ResidualNetwork, build_network
from multicat.types import ArchitectureSpec

logger = getLogger(__name__)

CHECKPOINT_FILENAME = "checkpoint.pt"
CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Raised when a checkpoint is missing, malformed or does not fit its stored architecture."""


@dataclass(frozen=True)
class Checkpoint:
    network: ResidualNetwork
    seed: int
    label_scheme: Optional[LabelScheme]
    epoch: int


def save_checkpoint(
    path: Path, network: ResidualNetwork, seed: int, label_scheme: Optional[LabelScheme], epoch: int
) -> None:
    """Write architecture, seed, label scheme and the state dict. The file is replaced atomically."""
    payload: Dict[str, Any] = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture": network.spec.model_dump(mode="json"),
        "seed": seed,
        "label_scheme": label_scheme.model_dump(mode="json") if label_scheme is not None else None,
        "epoch": epoch,
        "state_dict": {name: tensor.detach().cpu() for name, tensor in network.state_dict().items()},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary_path = path.with_name(f".{path.name}.tmp")
    torch.save(payload, temporary_path)
    temporary_path.replace(path)


def load_checkpoint(path: Path, device: str = "cpu") -> Checkpoint:
    """Rebuild the network from the stored architecture and load its parameters strictly."""
    if not path.is_file():
        raise CheckpointError(f'Checkpoint "{path}" does not exist')
    try:
        payload = torch.load(path, map_location=device, weights_only=True)
    except Exception as exception:
        raise CheckpointError(f'Checkpoint "{path}" can not be read: {exception}') from exception

    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f'"{path}" is not a checkpoint of format version {CHECKPOINT_FORMAT_VERSION}')
    try:
        spec = ArchitectureSpec.model_validate(payload["architecture"])
        label_scheme = (
            LabelScheme.model_validate(payload["label_scheme"]) if payload["label_scheme"] is not None else None
        )
    except (KeyError, ValidationError) as error:
        raise CheckpointError(f'Checkpoint "{path}" has an invalid header: {error}') from error

    network = build_network(spec, int(payload["seed"]))
    try:
        network.load_state_dict(payload["state_dict"], strict=True)
    except RuntimeError as error:
        raise CheckpointError(f'Parameters in "{path}" do not match the stored architecture: {error}') from error
    if label_scheme is not None and spec.output_width != label_scheme.width:
        raise CheckpointError(
            f"Output width {spec.output_width} does not match the label scheme width {label_scheme.width}"
        )
    network.to(device)
    logger.debug('Loaded checkpoint "%s" (epoch %d)', path, payload["epoch"])
    return Checkpoint(
        network=network, seed=int(payload["seed"]), label_scheme=label_scheme, epoch=int(payload["epoch"])
    )
