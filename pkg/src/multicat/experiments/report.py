"""Tables and figure data of an experiment, recomputed from the confusion matrices in its run directories."""

from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from multicat.analytics.confusion import (
    CONFUSION_FILENAME,
    AnalyticsError,
    ConfusionMatrix,
    ErrorRate,
    category_errors,
    leakage,
    per_class_errors_by_id,
    read_confusion_csv,
)
from multicat.analytics.deltas import align_by_class_id, histogram, per_class_delta, sign_summary
from multicat.analytics.scaling import relative_increase_curve
from multicat.analytics.tables import (
    FIGURE1_FILENAME,
    FIGURE2_FILENAME,
    FIGURE3_FILENAME,
    PER_CLASS_DELTAS_FILENAME,
    SIGN_SUMMARY_FILENAME,
    TABLE2_FILENAME,
    TABLE3_FILENAME,
    TABLE4_FILENAME,
    TABLE5_FILENAME,
    category_bars_frame,
    histogram_frame,
    label_table,
    leakage_table,
    per_category_table,
    per_class_delta_frame,
    relative_increase_frame,
    scaling_table,
    sign_summary_frame,
    write_table,
)
from multicat.exception import UserInputError
from multicat.experiments.records import ExperimentKind, RunRecord
from multicat.experiments.store import FIGURES_DIRNAME, RUNS_DIRNAME, TABLES_DIRNAME, read_experiment_record
from multicat.file import sanitize_file_part
from multicat.types import ExperimentConfig

logger = getLogger(__name__)

JOINT_CONFUSION_FILENAME = "confusion_joint.csv"
SHARED_RUN = "shared"
CLASS_ONLY_RUN = "class-only"
CLASS_CATEGORY_RUN = "class-category"
CATEGORY_TAG = "category"
SIZE_TAG = "size"

FIGURE_FILENAMES = {1: FIGURE1_FILENAME, 2: FIGURE2_FILENAME, 3: FIGURE3_FILENAME}
FIGURE_KINDS = {
    1: ExperimentKind.SCALING,
    2: ExperimentKind.SHARED_VS_SEPARATE,
    3: ExperimentKind.SHARED_VS_SEPARATE,
}


@dataclass
class ReportOutputs:
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    figures: Dict[str, pd.DataFrame] = field(default_factory=dict)
    summary: Dict[str, float] = field(default_factory=dict)


def category_run_name(category: int, category_name: str) -> str:
    return sanitize_file_part(f"category-{category:02d}-{category_name}")


def load_run_confusion(experiment_dir: Path, run: RunRecord) -> ConfusionMatrix:
    return read_confusion_csv(experiment_dir / RUNS_DIRNAME / sanitize_file_part(run.name) / CONFUSION_FILENAME)


def build_outputs(
    experiment_dir: Path, kind: ExperimentKind, config: ExperimentConfig, runs: Sequence[RunRecord]
) -> ReportOutputs:
    completed = [run for run in runs if run.completed]
    if kind == ExperimentKind.SCALING:
        return _scaling_outputs(experiment_dir, config, completed)
    if kind == ExperimentKind.SHARED_VS_SEPARATE:
        return _shared_outputs(experiment_dir, completed)
    if kind == ExperimentKind.LABEL_COMPARE:
        return _label_outputs(experiment_dir, completed)
    if kind in (ExperimentKind.TRAIN, ExperimentKind.EVALUATE):
        return _single_run_outputs(experiment_dir, completed)
    return ReportOutputs()


def write_report(
    experiment_dir: Path, kind: ExperimentKind, config: ExperimentConfig, runs: Sequence[RunRecord]
) -> Dict[str, float]:
    """Write all tables and figure data of the experiment and return its headline numbers."""
    outputs = build_outputs(experiment_dir, kind, config, runs)
    for filename, frame in outputs.tables.items():
        write_table(frame, experiment_dir / TABLES_DIRNAME / filename)
    for filename, frame in outputs.figures.items():
        write_table(frame, experiment_dir / FIGURES_DIRNAME / filename)
    logger.info(
        'Wrote %d tables and %d figures for "%s"', len(outputs.tables), len(outputs.figures), experiment_dir.name
    )
    return outputs.summary


def report_experiment(experiment_dir: Path) -> Dict[str, float]:
    """Recompute the tables and figures of a stored experiment."""
    record = read_experiment_record(experiment_dir)
    if record is None:
        raise UserInputError(f'"{experiment_dir}" holds no experiment record')
    return write_report(experiment_dir, record.kind, record.config, record.runs)


def emit_figure(experiment_dir: Path, figure: int) -> Path:
    """Recompute and write the data of a single figure; returns the written file."""
    if figure not in FIGURE_FILENAMES:
        raise UserInputError(f"There is no figure {figure}; choose one of {sorted(FIGURE_FILENAMES)}")
    record = read_experiment_record(experiment_dir)
    if record is None:
        raise UserInputError(f'"{experiment_dir}" holds no experiment record')
    if record.kind != FIGURE_KINDS[figure]:
        expected = FIGURE_KINDS[figure].value
        raise UserInputError(f"Figure {figure} needs a {expected} experiment, got {record.kind.value}")

    outputs = build_outputs(experiment_dir, record.kind, record.config, record.runs)
    filename = FIGURE_FILENAMES[figure]
    if filename not in outputs.figures:
        raise AnalyticsError(f"Figure {figure} can not be computed, the experiment lacks completed runs")
    path = experiment_dir / FIGURES_DIRNAME / filename
    write_table(outputs.figures[filename], path)
    return path


def _scaling_outputs(experiment_dir: Path, config: ExperimentConfig, runs: List[RunRecord]) -> ReportOutputs:
    outputs = ReportOutputs()
    sizes = config.dataset.scaling_sizes
    run_errors: List[List[float]] = [[] for _ in sizes]
    for run in runs:
        size = run.tags.get(SIZE_TAG)
        if size in sizes:
            run_errors[sizes.index(int(size))].append(load_run_confusion(experiment_dir, run).error().value)

    outputs.tables[TABLE2_FILENAME] = scaling_table(sizes, config.dataset.scaling_replicates, run_errors)
    measured = [(size, float(np.mean(errors))) for size, errors in zip(sizes, run_errors) if errors]
    for size, error in measured:
        outputs.summary[f"error_percent_{size}_classes"] = 100.0 * error
    if len(measured) < len(sizes):
        logger.warning("Only %d of %d dataset sizes have completed runs", len(measured), len(sizes))
    if measured:
        try:
            curve = relative_increase_curve([size for size, _ in measured], [error for _, error in measured])
        except AnalyticsError as error:
            logger.warning("No relative increase curve: %s", error)
        else:
            outputs.figures[FIGURE1_FILENAME] = relative_increase_frame(curve)
            outputs.summary["final_relative_error"] = curve.relative_errors[-1]
    return outputs


def _shared_outputs(experiment_dir: Path, runs: List[RunRecord]) -> ReportOutputs:
    outputs = ReportOutputs()
    by_name = {run.name: run for run in runs}
    if SHARED_RUN not in by_name:
        logger.warning("The shared network did not complete, no tables written")
        return outputs
    shared = load_run_confusion(experiment_dir, by_name[SHARED_RUN])
    report = leakage(shared)
    outputs.tables[TABLE4_FILENAME] = leakage_table(report)
    outputs.summary.update(
        {
            "shared_error_percent": report.total_error.percent,
            "inter_category_error_percent": report.inter_category_error.percent,
            "within_category_error_percent": report.within_category_error.percent,
        }
    )

    separate = _category_confusions(experiment_dir, runs, shared)
    if separate is None:
        logger.warning("Not every per-category network completed, only the leakage table was written")
        return outputs

    category_names = [shared.category_name(category) for category in range(shared.num_categories)]
    separate_errors = [cm.error() for cm in separate]
    shared_errors = category_errors(shared)
    outputs.tables[TABLE3_FILENAME] = per_category_table(category_names, separate_errors, shared_errors)
    outputs.figures[FIGURE2_FILENAME] = category_bars_frame(category_names, separate_errors, shared_errors)
    outputs.summary["per_category_average_percent"] = float(np.mean([error.percent for error in separate_errors]))
    outputs.summary["shared_category_average_percent"] = float(np.mean([error.percent for error in shared_errors]))

    separate_by_id: Dict[str, ErrorRate] = {}
    for cm in separate:
        separate_by_id.update(per_class_errors_by_id(cm))
    class_ids, shared_by_class, separate_by_class = align_by_class_id(per_class_errors_by_id(shared), separate_by_id)
    deltas = per_class_delta(
        [error.value for error in shared_by_class], [error.value for error in separate_by_class]
    )
    edges, counts = histogram([100.0 * delta for delta in deltas])
    outputs.figures[FIGURE3_FILENAME] = histogram_frame(edges, counts)
    outputs.tables[PER_CLASS_DELTAS_FILENAME] = per_class_delta_frame(
        class_ids, shared_by_class, separate_by_class, deltas, "shared", "per_category"
    )
    signs = sign_summary(deltas)
    outputs.tables[SIGN_SUMMARY_FILENAME] = sign_summary_frame(signs)
    outputs.summary["mean_delta_pp"] = 100.0 * float(np.mean(deltas))
    outputs.summary["classes_gained"] = signs.gained
    outputs.summary["classes_lost"] = signs.lost
    return outputs


def _category_confusions(
    experiment_dir: Path, runs: List[RunRecord], shared: ConfusionMatrix
) -> Optional[List[ConfusionMatrix]]:
    """Confusion matrices of the per-category networks in category order; a single category reuses the shared run."""
    if shared.num_categories == 1:
        return [shared]
    by_category = {int(run.tags[CATEGORY_TAG]): run for run in runs if CATEGORY_TAG in run.tags}
    if sorted(by_category) != list(range(shared.num_categories)):
        return None
    return [load_run_confusion(experiment_dir, by_category[category]) for category in range(shared.num_categories)]


def _label_outputs(experiment_dir: Path, runs: List[RunRecord]) -> ReportOutputs:
    outputs = ReportOutputs()
    by_name = {run.name: run for run in runs}
    if CLASS_ONLY_RUN not in by_name or CLASS_CATEGORY_RUN not in by_name:
        logger.warning("Both label arms must complete for the label comparison, no tables written")
        return outputs

    class_only = load_run_confusion(experiment_dir, by_name[CLASS_ONLY_RUN])
    class_category = load_run_confusion(experiment_dir, by_name[CLASS_CATEGORY_RUN])
    joint_path = experiment_dir / RUNS_DIRNAME / CLASS_CATEGORY_RUN / JOINT_CONFUSION_FILENAME
    joint = read_confusion_csv(joint_path).error() if joint_path.is_file() else None
    outputs.tables[TABLE5_FILENAME] = label_table(class_only.error(), class_category.error(), joint)

    class_ids, category_by_class, only_by_class = align_by_class_id(
        per_class_errors_by_id(class_category), per_class_errors_by_id(class_only)
    )
    deltas = per_class_delta([error.value for error in category_by_class], [error.value for error in only_by_class])
    outputs.tables[PER_CLASS_DELTAS_FILENAME] = per_class_delta_frame(
        class_ids, category_by_class, only_by_class, deltas, "class_category", "class_only"
    )
    signs = sign_summary(deltas)
    outputs.tables[SIGN_SUMMARY_FILENAME] = sign_summary_frame(signs)
    outputs.summary.update(
        {
            "class_only_error_percent": class_only.error().percent,
            "class_category_error_percent": class_category.error().percent,
            "improvement_pp": class_only.error().percent - class_category.error().percent,
            "classes_gained": signs.gained,
            "classes_lost": signs.lost,
        }
    )
    if joint is not None:
        outputs.summary["class_category_joint_error_percent"] = joint.percent
    return outputs


def _single_run_outputs(experiment_dir: Path, runs: List[RunRecord]) -> ReportOutputs:
    outputs = ReportOutputs()
    if not runs:
        return outputs
    cm = load_run_confusion(experiment_dir, runs[0])
    outputs.summary["error_percent"] = cm.error().percent
    if cm.category_of is not None:
        report = leakage(cm)
        outputs.tables[TABLE4_FILENAME] = leakage_table(report)
        outputs.summary["inter_category_error_percent"] = report.inter_category_error.percent
    return outputs
