from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from multicat.file import TEXT_ENCODING, write_text_atomic

CONFUSION_FILENAME = "confusion.csv"
CLASS_ID_COLUMN = "class_id"
CATEGORY_INDEX_COLUMN = "category_index"
CATEGORY_NAME_COLUMN = "category_name"


class AnalyticsError(ValueError):
    """Raised for inputs the analytics can not be computed on."""


class ErrorRate(BaseModel):
    """An error fraction kept as an integer pair so that sums and differences stay exact."""

    model_config = ConfigDict(frozen=True)

    numerator: int = Field(ge=0, description="Misclassified items.")
    denominator: int = Field(gt=0, description="Evaluated items.")

    @model_validator(mode="after")
    def check_fraction(self) -> "ErrorRate":
        if self.numerator > self.denominator:
            raise ValueError(f"{self.numerator} errors out of {self.denominator} items")
        return self

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def value(self) -> float:
        return self.numerator / self.denominator

    @property
    def percent(self) -> float:
        return 100.0 * self.numerator / self.denominator

    @property
    def accuracy(self) -> float:
        return 1.0 - self.value

    def minus(self, other: "ErrorRate") -> "ErrorRate":
        if other.denominator != self.denominator:
            raise AnalyticsError("Error rates can only be subtracted over the same denominator")
        return ErrorRate(numerator=self.numerator - other.numerator, denominator=self.denominator)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of (true class, predicted class); rows are true classes."""

    counts: np.ndarray
    category_of: Optional[Tuple[int, ...]] = None
    class_ids: Optional[Tuple[str, ...]] = None
    category_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        counts = self.counts
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise AnalyticsError(f"A confusion matrix must be square, got shape {counts.shape}")
        if not np.issubdtype(counts.dtype, np.integer) or bool((counts < 0).any()):
            raise AnalyticsError("Confusion counts must be non-negative integers")
        if self.category_of is not None:
            if len(self.category_of) != self.num_classes:
                raise AnalyticsError("The category map must cover every class")
            if sorted(set(self.category_of)) != list(range(max(self.category_of, default=-1) + 1)):
                raise AnalyticsError("Category indices must be contiguous from 0")
        if self.class_ids is not None and len(self.class_ids) != self.num_classes:
            raise AnalyticsError("There must be one class id per class")
        if self.category_names is not None and len(self.category_names) != self.num_categories:
            raise AnalyticsError("There must be one category name per category")

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def num_categories(self) -> int:
        return max(self.category_of) + 1 if self.category_of else 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def error(self) -> ErrorRate:
        if self.total == 0:
            raise AnalyticsError("The confusion matrix is empty")
        return ErrorRate(numerator=self.total - self.correct, denominator=self.total)

    def required_category_of(self) -> Tuple[int, ...]:
        if self.category_of is None:
            raise AnalyticsError("The confusion matrix has no category map")
        return self.category_of

    def category_name(self, category: int) -> str:
        return self.category_names[category] if self.category_names is not None else f"group_{category}"

    def class_id(self, class_index: int) -> str:
        return self.class_ids[class_index] if self.class_ids is not None else str(class_index)

    def membership(self) -> np.ndarray:
        """C x G one-hot matrix of the category map."""
        category_of = self.required_category_of()
        membership = np.zeros((self.num_classes, self.num_categories), dtype=np.int64)
        membership[np.arange(self.num_classes), list(category_of)] = 1
        return membership


def build_confusion(
    truth: Sequence[int] | np.ndarray,
    predictions: Sequence[int] | np.ndarray,
    num_classes: int,
    category_of: Optional[Sequence[int]] = None,
    class_ids: Optional[Sequence[str]] = None,
    category_names: Optional[Sequence[str]] = None,
) -> ConfusionMatrix:
    truth_array = np.asarray(truth, dtype=np.int64)
    prediction_array = np.asarray(predictions, dtype=np.int64)
    if truth_array.shape != prediction_array.shape or truth_array.ndim != 1:
        raise AnalyticsError("Truth and predictions must be flat lists of equal length")
    for name, labels in (("truth", truth_array), ("predictions", prediction_array)):
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise AnalyticsError(f"Labels in {name} must lie in [0, {num_classes})")
    counts = np.bincount(truth_array * num_classes + prediction_array, minlength=num_classes * num_classes)
    return ConfusionMatrix(
        counts=counts.reshape(num_classes, num_classes).astype(np.int64),
        category_of=tuple(category_of) if category_of is not None else None,
        class_ids=tuple(class_ids) if class_ids is not None else None,
        category_names=tuple(category_names) if category_names is not None else None,
    )


def per_class_errors(cm: ConfusionMatrix) -> List[ErrorRate]:
    """Error of every true class, in class order."""
    errors = []
    for class_index in range(cm.num_classes):
        row_total = int(cm.counts[class_index].sum())
        if row_total == 0:
            raise AnalyticsError(f'Class "{cm.class_id(class_index)}" has no test items')
        errors.append(ErrorRate(numerator=row_total - int(cm.counts[class_index, class_index]), denominator=row_total))
    return errors


def per_class_errors_by_id(cm: ConfusionMatrix) -> Dict[str, ErrorRate]:
    if cm.class_ids is None:
        raise AnalyticsError("The confusion matrix has no class ids")
    return dict(zip(cm.class_ids, per_class_errors(cm)))


def category_errors(cm: ConfusionMatrix) -> List[ErrorRate]:
    """Class-level error restricted to the test items of every category."""
    category_of = np.asarray(cm.required_category_of())
    row_totals = cm.counts.sum(axis=1)
    diagonal = np.diagonal(cm.counts)
    errors = []
    for category in range(cm.num_categories):
        members = category_of == category
        total = int(row_totals[members].sum())
        if total == 0:
            raise AnalyticsError(f'Category "{cm.category_name(category)}" has no test items')
        errors.append(ErrorRate(numerator=total - int(diagonal[members].sum()), denominator=total))
    return errors


def merge_to_superclasses(cm: ConfusionMatrix) -> ConfusionMatrix:
    """Sum the counts of every (true category, predicted category) block into a G x G matrix."""
    membership = cm.membership()
    return ConfusionMatrix(
        counts=membership.T @ cm.counts @ membership,
        category_of=tuple(range(cm.num_categories)),
        class_ids=tuple(cm.category_name(category) for category in range(cm.num_categories)),
        category_names=cm.category_names,
    )


class LeakageReport(BaseModel):
    """Split of the class-level error into errors across and within categories."""

    total_error: ErrorRate = Field(description="Class-level error over all test items.")
    inter_category_error: ErrorRate = Field(description="Items predicted as a class of another category.")
    within_category_error: ErrorRate = Field(description="Items predicted as another class of their category.")
    category_names: List[str] = Field(description="Category names in category index order.")
    per_category_leakage: List[ErrorRate] = Field(description="Inter-category error of the items of each category.")

    @model_validator(mode="after")
    def check_decomposition(self) -> "LeakageReport":
        parts = (self.inter_category_error, self.within_category_error)
        if any(part.denominator != self.total_error.denominator for part in parts) or (
            self.inter_category_error.numerator + self.within_category_error.numerator != self.total_error.numerator
        ):
            raise ValueError("Total error must equal inter-category plus within-category error")
        if len(self.category_names) != len(self.per_category_leakage):
            raise ValueError("There must be one leakage value per category")
        return self


def leakage(cm: ConfusionMatrix) -> LeakageReport:
    superclasses = merge_to_superclasses(cm)
    total = cm.error()
    inter = superclasses.error()
    return LeakageReport(
        total_error=total,
        inter_category_error=inter,
        within_category_error=total.minus(inter),
        category_names=[cm.category_name(category) for category in range(cm.num_categories)],
        per_category_leakage=per_class_errors(superclasses),
    )


def write_confusion_csv(cm: ConfusionMatrix, path: Path) -> None:
    """One row per true class: class id, category index and name, then one count column per predicted class."""
    class_ids = [cm.class_id(index) for index in range(cm.num_classes)]
    frame = pd.DataFrame(cm.counts, columns=class_ids)
    frame.insert(0, CLASS_ID_COLUMN, class_ids)
    if cm.category_of is not None:
        frame.insert(1, CATEGORY_INDEX_COLUMN, list(cm.category_of))
        frame.insert(2, CATEGORY_NAME_COLUMN, [cm.category_name(category) for category in cm.category_of])
    write_text_atomic(path, frame.to_csv(index=False))


def read_confusion_csv(path: Path) -> ConfusionMatrix:
    frame = pd.read_csv(
        path,
        dtype={CLASS_ID_COLUMN: str, CATEGORY_NAME_COLUMN: str},
        keep_default_na=False,
        encoding=TEXT_ENCODING,
    )
    class_ids = tuple(str(class_id) for class_id in frame[CLASS_ID_COLUMN])
    category_of = None
    category_names = None
    if CATEGORY_INDEX_COLUMN in frame.columns:
        category_of = tuple(int(category) for category in frame[CATEGORY_INDEX_COLUMN])
        names = frame.drop_duplicates(CATEGORY_INDEX_COLUMN).sort_values(CATEGORY_INDEX_COLUMN)
        category_names = tuple(str(name) for name in names[CATEGORY_NAME_COLUMN])
    header_columns = (CLASS_ID_COLUMN, CATEGORY_INDEX_COLUMN, CATEGORY_NAME_COLUMN)
    count_columns = [column for column in frame.columns if column not in header_columns]
    if len(count_columns) != len(class_ids):
        raise AnalyticsError(f'"{path}" must have one count column per class')
    return ConfusionMatrix(
        counts=frame[count_columns].to_numpy(dtype=np.int64),
        category_of=category_of,
        class_ids=class_ids,
        category_names=category_names,
    )
