import json
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from multicat.exception import UserInputError
from multicat.file import TEXT_ENCODING
from multicat.types import (
    BUILTIN_MANIFEST_PREFIX,
    ArchitectureSpec,
    AugmentConfig,
    CropPosition,
    DatasetConfig,
    ExperimentConfig,
    Preset,
    TrainConfig,
    ViewSpec,
)

logger = getLogger(__name__)

DEFAULT_PRESET = Preset.TOY
DEFAULT_CIFAR_POOL = "data/cifar100"
DEFAULT_TOY_POOL = "data/toy"


def paper_preset() -> ExperimentConfig:
    """ImageNet scale: 224 pixel inputs, 1300/50 images per class, the 10 x 10 reference manifest."""
    return ExperimentConfig(preset=Preset.PAPER)


def cifar_preset() -> ExperimentConfig:
    """CIFAR-100 pool with its 20 coarse categories at 32 pixels."""
    return ExperimentConfig(
        preset=Preset.CIFAR,
        dataset=DatasetConfig(
            pool_root=DEFAULT_CIFAR_POOL,
            manifest=BUILTIN_MANIFEST_PREFIX + "cifar100_coarse",
            train_per_class=500,
            test_per_class=100,
            scaling_sizes=[5, 10, 20, 50, 100],
            scaling_replicates=[10, 10, 5, 2, 1],
        ),
        architecture=ArchitectureSpec.desk(output_width=100),
        train=TrainConfig(
            batch_size=128,
            epochs=60,
            augment=AugmentConfig(output_size=32, min_area_fraction=0.35),
            views=ViewSpec(scales=[36 / 32, 40 / 32]),
        ),
    )


def toy_preset() -> ExperimentConfig:
    """Synthetic pool written by make-toy-pool; every study finishes in minutes on a CPU."""
    return ExperimentConfig(
        preset=Preset.TOY,
        dataset=DatasetConfig(
            pool_root=DEFAULT_TOY_POOL,
            manifest="manifest.csv",
            train_per_class=40,
            test_per_class=10,
            scaling_sizes=[10, 50, 100],
            scaling_replicates=[3, 2, 1],
            color_statistics_max_pixels=100_000,
        ),
        architecture=ArchitectureSpec.tiny(output_width=100, input_size=16),
        train=TrainConfig(
            learning_rate=0.003,
            batch_size=64,
            epochs=8,
            augment=AugmentConfig(output_size=16, min_area_fraction=0.35),
            views=ViewSpec(scales=[1.0, 20 / 16], positions=[CropPosition.CENTER, CropPosition.TOP_LEFT]),
        ),
    )


PRESETS = {Preset.PAPER: paper_preset, Preset.CIFAR: cifar_preset, Preset.TOY: toy_preset}


def preset_config(preset: Preset) -> ExperimentConfig:
    return PRESETS[preset]()


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Merge override into a copy of base. Nested dicts merge key by key, every other value replaces."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_experiment_config(
    preset: Optional[Preset] = None, config_path: Optional[Path] = None, seed: Optional[int] = None
) -> ExperimentConfig:
    """Build the experiment config: preset, then the config file merged over it, then the seed override.

    Without an explicit preset the preset named in the config file is used, else the toy preset.
    """
    overrides: Dict[str, Any] = {}
    if config_path is not None:
        try:
            overrides = json.loads(config_path.read_text(encoding=TEXT_ENCODING))
        except (OSError, json.JSONDecodeError) as error:
            raise UserInputError(f'Can not read config file "{config_path}": {error}') from error
        if not isinstance(overrides, dict):
            raise UserInputError(f'Config file "{config_path}" must hold a JSON object')

    if preset is None:
        try:
            preset = Preset(overrides.get("preset") or DEFAULT_PRESET)
        except ValueError as error:
            raise UserInputError(f"Unknown preset in config file: {error}") from error

    merged = deep_merge(preset_config(preset).model_dump(mode="json"), overrides)
    merged["preset"] = preset.value
    if seed is not None:
        merged["seed"] = seed
    try:
        config = ExperimentConfig.model_validate(merged)
    except ValidationError as error:
        raise UserInputError(f"Invalid experiment config: {error}") from error
    logger.debug("Experiment config (preset %s): %s", preset.value, config.model_dump_json())
    return config
