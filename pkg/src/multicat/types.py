from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

CURRENT_SCHEMA_VERSION = 1
BUILTIN_MANIFEST_PREFIX = "builtin:"

RESNET34_STAGES: List[Tuple[int, int]] = [(3, 64), (4, 128), (6, 256), (3, 512)]


class AreaReference(str, Enum):
    MAX_SQUARE = "max_square"
    IMAGE = "image"


class AugmentConfig(BaseModel):
    """Train-time crop, flip and color augmentation."""

    min_area_fraction: float = Field(
        default=0.08, gt=0.0, le=1.0, description="Smallest crop area relative to the area reference."
    )
    max_area_fraction: float = Field(
        default=1.0, gt=0.0, le=1.0, description="Largest crop area relative to the area reference."
    )
    min_aspect: float = Field(default=3 / 4, gt=0.0, description="Smallest width/height ratio of a crop.")
    max_aspect: float = Field(default=4 / 3, gt=0.0, description="Largest width/height ratio of a crop.")
    output_size: int = Field(default=224, ge=1, description="Side length in pixels of the network input.")
    color_jitter_strength: float = Field(
        default=0.1, ge=0.0, description="Standard deviation of the PCA lighting coefficients."
    )
    horizontal_flip: bool = Field(default=True, description="Mirror crops horizontally with probability 0.5.")
    area_reference: AreaReference = Field(
        default=AreaReference.MAX_SQUARE,
        description="Area the crop fractions refer to: the largest inscribed square or the full image.",
    )
    max_crop_attempts: int = Field(
        default=10, ge=1, description="Draws tried before falling back to the centered max-square crop."
    )

    @model_validator(mode="after")
    def check_ranges(self) -> "AugmentConfig":
        if self.min_area_fraction > self.max_area_fraction:
            raise ValueError("min_area_fraction must not exceed max_area_fraction")
        if self.min_aspect > self.max_aspect:
            raise ValueError("min_aspect must not exceed max_aspect")
        return self


class CropPosition(str, Enum):
    CENTER = "center"
    TOP_LEFT = "top_left"
    TOP_RIGHT = "top_right"
    BOTTOM_LEFT = "bottom_left"
    BOTTOM_RIGHT = "bottom_right"


class ViewSpec(BaseModel):
    """Deterministic view set used for multi-crop evaluation."""

    scales: List[float] = Field(
        default_factory=lambda: [256 / 224, 288 / 224],
        min_length=1,
        description="The shorter image side is resized to round(scale * output_size) for each scale.",
    )
    positions: List[CropPosition] = Field(
        default_factory=lambda: list(CropPosition), min_length=1, description="Crop positions per scale."
    )
    mirror: bool = Field(default=True, description="Add the horizontal mirror of every crop.")

    @model_validator(mode="after")
    def check_scales(self) -> "ViewSpec":
        if any(scale < 1.0 for scale in self.scales):
            raise ValueError("View scales must be at least 1.0, crops must fit into the resized image")
        return self

    @classmethod
    def center_only(cls) -> "ViewSpec":
        return cls(scales=[1.0], positions=[CropPosition.CENTER], mirror=False)

    @property
    def view_count(self) -> int:
        return len(self.scales) * len(self.positions) * (2 if self.mirror else 1)


class Downsampling(str, Enum):
    MAXPOOL = "maxpool"
    STRIDED = "strided"


class Shortcut(str, Enum):
    ZERO_PAD = "zero_pad"
    PROJECTION = "projection"


class ArchitectureSpec(BaseModel):
    """Residual network layout. The defaults describe the 34-layer network with max pools between stages."""

    input_size: int = Field(default=224, ge=1, description="Side length in pixels of the network input.")
    stem_kernel: int = Field(default=7, ge=1, description="Kernel size of the stem convolution.")
    stem_stride: int = Field(default=2, ge=1, description="Stride of the stem convolution.")
    stem_channels: int = Field(default=64, ge=0, description="Output channels of the stem; 0 disables the stem.")
    stem_pool: bool = Field(default=True, description="Apply a 3x3/2 max pool before the first stage.")
    stages: List[Tuple[int, int]] = Field(
        default_factory=lambda: list(RESNET34_STAGES), description="List of (block_count, channels) per stage."
    )
    downsampling: Downsampling = Field(
        default=Downsampling.MAXPOOL,
        description="maxpool: 3x3/2 max pool between stages; strided: stride-2 first convolution per stage.",
    )
    shortcut: Shortcut = Field(
        default=Shortcut.ZERO_PAD, description="Shortcut used when a block changes the channel count."
    )
    batch_norm: bool = Field(default=True, description="Batch normalization after every convolution.")
    output_width: int = Field(default=1000, ge=0, description="Width of the classifier; 0 disables the head.")

    @model_validator(mode="after")
    def check_stages(self) -> "ArchitectureSpec":
        for block_count, channels in self.stages:
            if block_count < 1 or channels < 1:
                raise ValueError(f"Invalid stage ({block_count}, {channels})")
        return self

    @classmethod
    def paper(cls, output_width: int) -> "ArchitectureSpec":
        return cls(output_width=output_width)

    @classmethod
    def desk(cls, output_width: int) -> "ArchitectureSpec":
        """Same stage pattern for 32x32 inputs: 3x3 stride 1 stem without pooling."""
        return cls(input_size=32, stem_kernel=3, stem_stride=1, stem_pool=False, output_width=output_width)

    @classmethod
    def tiny(cls, output_width: int, input_size: int = 16) -> "ArchitectureSpec":
        return cls(
            input_size=input_size,
            stem_kernel=3,
            stem_stride=1,
            stem_channels=4,
            stem_pool=False,
            stages=[(1, 4), (1, 8)],
            output_width=output_width,
        )

    def with_output_width(self, output_width: int) -> "ArchitectureSpec":
        return self.model_copy(update={"output_width": output_width})


class LabelKind(str, Enum):
    CLASS_ONLY = "class_only"
    CLASS_CATEGORY = "class_category"


class DecodeRule(str, Enum):
    CLASS_SLOTS = "class_slots"
    JOINT = "joint"


class LabelConfig(BaseModel):
    kind: LabelKind = Field(default=LabelKind.CLASS_ONLY, description="Target encoding policy.")
    decode_rule: DecodeRule = Field(
        default=DecodeRule.CLASS_SLOTS,
        description="class_slots: argmax over class slots only; joint: class probability plus its category's.",
    )


class TrainConfig(BaseModel):
    """Optimization settings of a single training run."""

    learning_rate: float = Field(default=0.001, gt=0.0, description="Base learning rate.")
    lr_milestones: List[float] = Field(
        default_factory=lambda: [0.5, 0.75],
        description="Fractions of the epoch budget after which the learning rate is decayed.",
    )
    lr_decay_factor: float = Field(default=0.1, gt=0.0, le=1.0, description="Multiplier applied at each milestone.")
    batch_size: int = Field(default=256, ge=1, description="Mini-batch size.")
    epochs: int = Field(default=90, ge=1, description="Number of epochs.")
    weight_decay: float = Field(default=1e-4, ge=0.0, description="L2 penalty on convolution and classifier weights.")
    seed: int = Field(default=0, description="Seed of initialization, shuffling and augmentation.")
    rmsprop_decay: float = Field(default=0.999, gt=0.0, lt=1.0, description="Decay of the squared-gradient average.")
    rmsprop_epsilon: float = Field(default=1e-8, gt=0.0, description="Added to the root of the running average.")
    eval_every_epoch: bool = Field(default=True, description="Log the center-crop test error after each epoch.")
    label: LabelConfig = Field(default_factory=LabelConfig, description="Label scheme of the run.")
    augment: AugmentConfig = Field(default_factory=AugmentConfig, description="Train-time augmentation.")
    views: ViewSpec = Field(default_factory=ViewSpec, description="Views averaged by the final evaluation.")


class Grouping(str, Enum):
    NATURAL = "natural"
    RANDOM = "random"


class DatasetConfig(BaseModel):
    """Where images come from and how datasets are drawn from them."""

    pool_root: Optional[str] = Field(
        default=None, description="Image folder tree with train/<class_id>/ and test/<class_id>/ directories."
    )
    manifest: str = Field(
        default=BUILTIN_MANIFEST_PREFIX + "imagenet_categories",
        description=f"Manifest file path, or '{BUILTIN_MANIFEST_PREFIX}<name>' for a manifest shipped with multicat.",
    )
    train_per_class: int = Field(default=1300, ge=1, description="Training images drawn per class.")
    test_per_class: int = Field(default=50, ge=1, description="Test images drawn per class.")
    scaling_sizes: List[int] = Field(
        default_factory=lambda: [10, 50, 100, 500, 1000], min_length=1, description="Class counts of the scaling study."
    )
    scaling_replicates: List[int] = Field(
        default_factory=lambda: [10, 10, 5, 2, 1], min_length=1, description="Datasets sampled per class count."
    )
    grouping: Grouping = Field(default=Grouping.NATURAL, description="Category map used by the shared study.")
    random_groups: Optional[int] = Field(
        default=None, ge=1, description="Group count for random grouping; defaults to the manifest category count."
    )
    random_from_pool: bool = Field(
        default=False,
        description="With random grouping, draw a fresh class set of the manifest's size from the pool.",
    )
    color_statistics_max_pixels: int = Field(
        default=1_000_000, ge=1, description="Pixel budget of the color statistics pass."
    )

    @model_validator(mode="after")
    def check_scaling(self) -> "DatasetConfig":
        if len(self.scaling_sizes) != len(self.scaling_replicates):
            raise ValueError("scaling_sizes and scaling_replicates must have equal length")
        if any(value < 1 for value in self.scaling_sizes + self.scaling_replicates):
            raise ValueError("scaling sizes and replicate counts must be positive")
        return self


class Preset(str, Enum):
    PAPER = "paper"
    CIFAR = "cifar"
    TOY = "toy"


class ExperimentConfig(BaseModel):
    """
    Experiment configuration

    Root of all settings that define an experiment. A config file is deep-merged over a preset.
    """

    schema_version: int = Field(default=CURRENT_SCHEMA_VERSION, description="Version of this config schema.")
    preset: Optional[Preset] = Field(default=None, description="Preset the config was derived from.")
    seed: int = Field(default=0, description="Experiment seed; every sampling and run seed is derived from it.")
    dataset: DatasetConfig = Field(default_factory=DatasetConfig, description="Dataset sources and sampling.")
    architecture: ArchitectureSpec = Field(
        default_factory=ArchitectureSpec, description="Network layout; output_width is set per run."
    )
    train: TrainConfig = Field(default_factory=TrainConfig, description="Optimization settings.")

    @model_validator(mode="after")
    def check_schema_version(self) -> "ExperimentConfig":
        if self.schema_version != CURRENT_SCHEMA_VERSION:
            raise ValueError(
                f"Unsupported config schema version {self.schema_version}, expected {CURRENT_SCHEMA_VERSION}"
            )
        if self.architecture.input_size != self.train.augment.output_size:
            raise ValueError("architecture.input_size and train.augment.output_size must agree")
        return self
