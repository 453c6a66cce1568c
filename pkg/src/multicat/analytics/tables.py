"""Table and figure data as DataFrames. The first column of every frame names the result it mirrors."""

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from multicat.analytics.confusion import ErrorRate, LeakageReport
from multicat.analytics.deltas import SignSummary
from multicat.analytics.scaling import ScalingCurve
from multicat.file import write_text_atomic

PER_CATEGORY_ROW = "Network Per Category"
SHARED_ROW = "Shared Network"
AVERAGE_COLUMN = "Avg."
CLASS_LABELS_ROW = "Class labels"
CLASS_CATEGORY_LABELS_ROW = "Class/Category labels"
CLASS_CATEGORY_JOINT_ROW = "Class/Category labels, joint decode"

TABLE2_FILENAME = "table2_data_size.csv"
TABLE3_FILENAME = "table3_per_category.csv"
TABLE4_FILENAME = "table4_leakage.csv"
TABLE5_FILENAME = "table5_labels.csv"
FIGURE1_FILENAME = "figure1_relative_increase.csv"
FIGURE2_FILENAME = "figure2_category_errors.csv"
FIGURE3_FILENAME = "figure3_delta_histogram.csv"
PER_CLASS_DELTAS_FILENAME = "per_class_deltas.csv"
SIGN_SUMMARY_FILENAME = "delta_signs.csv"


def write_table(frame: pd.DataFrame, path: Path) -> None:
    write_text_atomic(path, frame.to_csv(index=False, float_format="%.6g"))


def scaling_table(
    sizes: Sequence[int], replicates: Sequence[int], run_errors: Sequence[Sequence[float]]
) -> pd.DataFrame:
    """Average error per class count over the completed replicates."""
    return pd.DataFrame(
        {
            "table2_data_size": list(sizes),
            "replicates": list(replicates),
            "completed_runs": [len(errors) for errors in run_errors],
            "error_percent": [100.0 * float(np.mean(errors)) if errors else float("nan") for errors in run_errors],
        }
    )


def relative_increase_frame(curve: ScalingCurve) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "figure1_num_classes": curve.sizes,
            "relative_classes": curve.relative_sizes,
            "relative_error": curve.relative_errors,
            "growth_ratio": curve.growth_ratios,
        }
    )


def per_category_table(
    category_names: Sequence[str], separate: Sequence[ErrorRate], shared: Sequence[ErrorRate]
) -> pd.DataFrame:
    """Two rows of per-category error percentages with their plain average."""
    rows = []
    for label, errors in ((PER_CATEGORY_ROW, separate), (SHARED_ROW, shared)):
        percents = [error.percent for error in errors]
        rows.append([label, *percents, float(np.mean(percents))])
    return pd.DataFrame(rows, columns=["table3_network", *category_names, AVERAGE_COLUMN])


def category_bars_frame(
    category_names: Sequence[str], separate: Sequence[ErrorRate], shared: Sequence[ErrorRate]
) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "figure2_category": list(category_names),
            "per_category_network_error_percent": [error.percent for error in separate],
            "shared_network_error_percent": [error.percent for error in shared],
        }
    )


def leakage_table(report: LeakageReport) -> pd.DataFrame:
    """Leakage per category, then the average over categories and the overall decomposition."""
    rows: List[Dict[str, object]] = [
        {"table4_category": name, "leakage_percent": rate.percent, "items": rate.denominator}
        for name, rate in zip(report.category_names, report.per_category_leakage)
    ]
    rows.append(
        {
            "table4_category": AVERAGE_COLUMN,
            "leakage_percent": float(np.mean([rate.percent for rate in report.per_category_leakage])),
            "items": report.total_error.denominator,
        }
    )
    for name, rate in (
        ("total_error", report.total_error),
        ("inter_category_error", report.inter_category_error),
        ("within_category_error", report.within_category_error),
    ):
        rows.append({"table4_category": name, "leakage_percent": rate.percent, "items": rate.denominator})
    return pd.DataFrame(rows, columns=["table4_category", "leakage_percent", "items"])


def histogram_frame(edges: np.ndarray, counts: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(
        {"figure3_bin_start_pp": edges[:-1], "bin_end_pp": edges[1:], "count": counts.astype(np.int64)}
    )


def per_class_delta_frame(
    class_ids: Sequence[str],
    error_a: Sequence[ErrorRate],
    error_b: Sequence[ErrorRate],
    deltas: Sequence[float],
    label_a: str,
    label_b: str,
) -> pd.DataFrame:
    """Per-class errors of two runs in percent and delta = accuracy_a - accuracy_b in percentage points."""
    return pd.DataFrame(
        {
            "class_id": list(class_ids),
            f"{label_a}_error_percent": [error.percent for error in error_a],
            f"{label_b}_error_percent": [error.percent for error in error_b],
            "delta_pp": [100.0 * delta for delta in deltas],
        }
    )


def sign_summary_frame(summary: SignSummary) -> pd.DataFrame:
    return pd.DataFrame(
        {"figure3_sign": ["gained", "lost", "unchanged"], "classes": [summary.gained, summary.lost, summary.unchanged]}
    )


def label_table(
    class_only: ErrorRate, class_category: ErrorRate, class_category_joint: Optional[ErrorRate] = None
) -> pd.DataFrame:
    rows = [(CLASS_LABELS_ROW, class_only.percent), (CLASS_CATEGORY_LABELS_ROW, class_category.percent)]
    if class_category_joint is not None:
        rows.append((CLASS_CATEGORY_JOINT_ROW, class_category_joint.percent))
    return pd.DataFrame(rows, columns=["table5_labels", "error_percent"])
