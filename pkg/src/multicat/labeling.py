from typing import Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator
from torch import Tensor

from multicat.data.split import DatasetSplit
from multicat.types import DecodeRule, LabelConfig, LabelKind

TARGET_SUM_TOLERANCE = 1e-6


class LabelError(ValueError):
    """Raised for invalid label indices, targets or logits."""


class LabelScheme(BaseModel):
    """
    Label scheme

    ClassOnly targets have one slot per class. ClassCategory targets have G category slots at [0, G)
    followed by C class slots at [G, G + C).
    """

    model_config = ConfigDict(frozen=True)

    kind: LabelKind = Field(description="Target encoding policy.")
    num_classes: int = Field(ge=1, description="Number of classes C.")
    num_categories: int = Field(default=0, ge=0, description="Number of categories G.")
    category_of: Optional[Tuple[int, ...]] = Field(
        default=None, description="Category index of every class; required for ClassCategory."
    )
    decode_rule: DecodeRule = Field(default=DecodeRule.CLASS_SLOTS, description="How class predictions are decoded.")

    @model_validator(mode="after")
    def check_layout(self) -> "LabelScheme":
        if self.category_of is not None:
            if len(self.category_of) != self.num_classes:
                raise ValueError("category_of must list one category per class")
            if any(not 0 <= category < self.num_categories for category in self.category_of):
                raise ValueError(f"Category indices must lie in [0, {self.num_categories})")
        if self.kind == LabelKind.CLASS_CATEGORY and (self.num_categories < 1 or self.category_of is None):
            raise ValueError("ClassCategory labels need categories and a class to category map")
        if self.decode_rule == DecodeRule.JOINT and self.kind != LabelKind.CLASS_CATEGORY:
            raise ValueError("The joint decode rule needs ClassCategory labels")
        return self

    @property
    def width(self) -> int:
        """Length of a target and of the network output."""
        return self.num_classes + self.class_offset

    @property
    def class_offset(self) -> int:
        return self.num_categories if self.kind == LabelKind.CLASS_CATEGORY else 0

    def required_category_of(self) -> Tuple[int, ...]:
        if self.category_of is None:
            raise LabelError("The label scheme has no class to category map")
        return self.category_of

    @classmethod
    def for_split(cls, split: DatasetSplit, config: LabelConfig) -> "LabelScheme":
        if config.kind == LabelKind.CLASS_CATEGORY and split.category_of is None:
            raise LabelError("ClassCategory labels need a split with categories")
        return cls(
            kind=config.kind,
            num_classes=split.num_classes,
            num_categories=split.num_categories,
            category_of=split.category_of,
            decode_rule=config.decode_rule,
        )


def encode_label(scheme: LabelScheme, class_index: int, category_index: Optional[int] = None) -> np.ndarray:
    """Target distribution of one item: one-hot, or 0.5 on the category slot and 0.5 on the class slot."""
    if not 0 <= class_index < scheme.num_classes:
        raise LabelError(f"Class index {class_index} is outside [0, {scheme.num_classes})")
    target = np.zeros(scheme.width, dtype=np.float64)
    if scheme.kind == LabelKind.CLASS_ONLY:
        if category_index is not None:
            raise LabelError("ClassOnly labels take no category index")
        target[class_index] = 1.0
        return target

    if category_index is None:
        raise LabelError("ClassCategory labels need a category index")
    if not 0 <= category_index < scheme.num_categories:
        raise LabelError(f"Category index {category_index} is outside [0, {scheme.num_categories})")
    target[category_index] = 0.5
    target[scheme.class_offset + class_index] = 0.5
    return target


def encode_batch(scheme: LabelScheme, class_indices: Tensor) -> Tensor:
    """Targets of a batch of class indices, N x width, in the default float dtype."""
    targets = torch.zeros(len(class_indices), scheme.width)
    rows = torch.arange(len(class_indices))
    if scheme.kind == LabelKind.CLASS_ONLY:
        targets[rows, class_indices] = 1.0
    else:
        categories = torch.tensor(scheme.required_category_of(), dtype=torch.long)[class_indices]
        targets[rows, categories] = 0.5
        targets[rows, scheme.class_offset + class_indices] = 0.5
    return targets


def soft_cross_entropy(logits: Tensor, target: Tensor) -> Tensor:
    """-sum(target * log_softmax(logits)) per row, averaged over the batch for 2-d inputs."""
    if logits.shape != target.shape:
        raise LabelError(f"Logits of shape {tuple(logits.shape)} do not match targets of shape {tuple(target.shape)}")
    check_target(target)
    losses = -(target * torch.log_softmax(logits, dim=-1)).sum(dim=-1)
    return losses.mean() if losses.dim() > 0 else losses


def check_target(target: Tensor) -> None:
    with torch.no_grad():
        if bool((target < 0).any()):
            raise LabelError("Targets must not be negative")
        sums = target.double().sum(dim=-1)
        if bool(((sums - 1.0).abs() > TARGET_SUM_TOLERANCE).any()):
            raise LabelError(f"Targets must sum to 1 within {TARGET_SUM_TOLERANCE}")


def class_scores(scheme: LabelScheme, probabilities: Tensor) -> Tensor:
    """Per-class decode scores from (averaged) softmax probabilities, ... x C."""
    scores = probabilities[..., scheme.class_offset :]
    if scheme.decode_rule == DecodeRule.JOINT:
        scores = scores + probabilities[..., list(scheme.required_category_of())]
    return scores


def decode_class(scheme: LabelScheme, logits: Tensor | Sequence[float]) -> int:
    """Predicted class of one logit vector; ties go to the lowest class index."""
    values = torch.as_tensor(logits, dtype=torch.float64)
    _check_width(scheme, values)
    if scheme.decode_rule == DecodeRule.JOINT:
        scores = class_scores(scheme, torch.softmax(values, dim=-1))
    else:
        scores = values[scheme.class_offset :]
    return int(torch.argmax(scores))


def decode_probabilities(scheme: LabelScheme, probabilities: Tensor) -> Tensor:
    """Predicted classes of an N x width batch of probabilities."""
    _check_width(scheme, probabilities)
    return torch.argmax(class_scores(scheme, probabilities), dim=-1)


def decode_category(
    scheme: LabelScheme, logits: Tensor | Sequence[float], category_map: Optional[Sequence[int]] = None
) -> int:
    """Category of the predicted class."""
    mapping = category_map if category_map is not None else scheme.category_of
    if mapping is None:
        raise LabelError("Decoding a category needs a class to category map")
    return int(mapping[decode_class(scheme, logits)])


def _check_width(scheme: LabelScheme, values: Tensor) -> None:
    if values.shape[-1] != scheme.width:
        raise LabelError(f"Expected {scheme.width} outputs, got {values.shape[-1]}")
