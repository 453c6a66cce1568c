import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from multicat.analytics.confusion import AnalyticsError, ErrorRate

DEFAULT_BIN_WIDTH = 1.0


class SignSummary(BaseModel):
    gained: int = Field(description="Classes with positive delta (better with the shared network).")
    lost: int = Field(description="Classes with negative delta.")
    unchanged: int = Field(description="Classes with zero delta.")


def per_class_delta(errors_shared: Sequence[float], errors_separate: Sequence[float]) -> List[float]:
    """accuracy_shared - accuracy_separate for every class, i.e. error_separate - error_shared.

    Both sequences must be in the same class order; see align_by_class_id.
    """
    if len(errors_shared) != len(errors_separate):
        raise AnalyticsError(f"Got {len(errors_shared)} shared and {len(errors_separate)} separate per-class errors")
    return [separate - shared for shared, separate in zip(errors_shared, errors_separate)]


def align_by_class_id(
    shared: Dict[str, ErrorRate], separate: Dict[str, ErrorRate]
) -> Tuple[List[str], List[ErrorRate], List[ErrorRate]]:
    """Pair per-class errors of two runs by class id, in the class order of shared."""
    if shared.keys() != separate.keys():
        missing = sorted(shared.keys() ^ separate.keys())
        raise AnalyticsError(f"Per-class errors do not cover the same classes, differing ids: {missing}")
    class_ids = list(shared)
    return class_ids, [shared[class_id] for class_id in class_ids], [separate[class_id] for class_id in class_ids]


def sign_summary(deltas: Sequence[float]) -> SignSummary:
    return SignSummary(
        gained=sum(1 for delta in deltas if delta > 0),
        lost=sum(1 for delta in deltas if delta < 0),
        unchanged=sum(1 for delta in deltas if delta == 0),
    )


def histogram(values: Sequence[float], bin_width: float = DEFAULT_BIN_WIDTH) -> Tuple[np.ndarray, np.ndarray]:
    """Counts over half-open bins [k * bin_width, (k + 1) * bin_width) covering all values.

    Returns (edges, counts) with len(edges) == len(counts) + 1.
    """
    if not bin_width > 0:
        raise AnalyticsError(f"The bin width must be positive, got {bin_width}")
    if len(values) == 0:
        raise AnalyticsError("Can not build a histogram of no values")
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise AnalyticsError("Histogram values must be finite")

    first = _bin_index(float(array.min()), bin_width)
    last = _bin_index(float(array.max()), bin_width)
    edges = np.arange(first, last + 2, dtype=np.float64) * bin_width
    bins = np.searchsorted(edges, array, side="right") - 1
    counts = np.bincount(bins, minlength=len(edges) - 1)
    return edges, counts


def _bin_index(value: float, bin_width: float) -> int:
    # k with k * w <= value < (k + 1) * w, evaluated with the products used as edges
    index = math.floor(value / bin_width)
    while index * bin_width > value:
        index -= 1
    while (index + 1) * bin_width <= value:
        index += 1
    return index
