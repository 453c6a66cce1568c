import asyncio
from dataclasses import dataclass, field
from datetime import UTC, datetime
from logging import Logger, getLogger
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import torch

from multicat.analytics.confusion import (
    CONFUSION_FILENAME,
    ConfusionMatrix,
    build_confusion,
    leakage,
    write_confusion_csv,
)
from multicat.augmentation.color import COLOR_STATISTICS_FILENAME
from multicat.data.split import DatasetSplit, write_split_csv
from multicat.experiments.records import ExperimentKind, ExperimentRecord, RunRecord, RunState
from multicat.experiments.report import JOINT_CONFUSION_FILENAME, write_report
from multicat.experiments.sources import DataSources, color_statistics_for
from multicat.experiments.store import ResultsStore
from multicat.labeling import LabelScheme, decode_probabilities
from multicat.settings import HarnessSettings
from multicat.taskcontext import TaskContext
from multicat.taskcontextimpl import TaskContextImpl
from multicat.training.evaluation import PREDICTIONS_FILENAME, Evaluation, evaluate
from multicat.training.trainer import train
from multicat.types import DecodeRule, ExperimentConfig, LabelConfig, LabelKind

logger = getLogger(__name__)

SPLIT_FILENAME = "split.csv"


@dataclass(frozen=True)
class RunPlan:
    """One network to train: its dataset, label policy, seed and study coordinates."""

    name: str
    split: DatasetSplit
    label: LabelConfig
    seed: int
    tags: Dict[str, str | int] = field(default_factory=dict)


Planner = Callable[[ExperimentConfig, DataSources], List[RunPlan]]


async def execute_run(ctx: TaskContext, plan: RunPlan) -> RunRecord:
    return await asyncio.to_thread(train_and_evaluate, ctx, plan)


def train_and_evaluate(ctx: TaskContext, plan: RunPlan) -> RunRecord:
    """Train the planned network, evaluate it on the multi-crop views and persist its confusion matrices."""
    started = datetime.now(tz=UTC)
    config = ctx.config
    settings = ctx.settings
    run_dir = ctx.run_path
    write_split_csv(plan.split, run_dir / SPLIT_FILENAME)
    statistics = color_statistics_for(plan.split, run_dir / COLOR_STATISTICS_FILENAME, config, plan.seed)
    scheme = LabelScheme.for_split(plan.split, plan.label)
    train_config = config.train.model_copy(update={"seed": plan.seed, "label": plan.label})

    outcome = train(plan.split, scheme, config.architecture, train_config, run_dir, ctx.logger, settings, statistics)
    evaluation = evaluate(
        outcome.network,
        plan.split.test_items,
        scheme,
        train_config.views,
        settings.device,
        train_config.batch_size,
        settings.num_workers,
    )
    return record_evaluation(
        run_dir, plan.name, plan.split, scheme, evaluation, ctx.logger, plan.seed, plan.tags, started
    )


def record_evaluation(
    run_dir: Path,
    run_name: str,
    split: DatasetSplit,
    scheme: LabelScheme,
    evaluation: Evaluation,
    run_logger: Logger,
    seed: Optional[int] = None,
    tags: Optional[Dict[str, str | int]] = None,
    started: Optional[datetime] = None,
) -> RunRecord:
    """Write predictions.csv and confusion.csv of an evaluation and summarize them in a completed run record.

    For class/category labels the joint decode rule is evaluated from the same probabilities and written
    to confusion_joint.csv.
    """
    evaluation.write_predictions(run_dir / PREDICTIONS_FILENAME)
    cm = _confusion(split, evaluation.truth, evaluation.predictions)
    write_confusion_csv(cm, run_dir / CONFUSION_FILENAME)

    joint_error = None
    if scheme.kind == LabelKind.CLASS_CATEGORY:
        joint_scheme = scheme.model_copy(update={"decode_rule": DecodeRule.JOINT})
        joint_predictions = decode_probabilities(joint_scheme, torch.from_numpy(evaluation.probabilities)).numpy()
        joint_cm = _confusion(split, evaluation.truth, joint_predictions)
        write_confusion_csv(joint_cm, run_dir / JOINT_CONFUSION_FILENAME)
        joint_error = joint_cm.error()

    error = cm.error()
    run_logger.info("Multi-crop error %.2f%% on %d test images", error.percent, error.denominator)
    return RunRecord(
        name=run_name,
        state=RunState.COMPLETED,
        tags=tags or {},
        seed=seed,
        label_scheme=scheme,
        class_ids=list(split.class_ids),
        category_names=_category_names(split),
        train_images=len(split.train_items),
        test_images=len(split.test_items),
        error=error,
        joint_error=joint_error,
        leakage=leakage(cm) if split.category_of is not None else None,
        started=started,
        finished=datetime.now(tz=UTC),
    )


def _category_names(split: DatasetSplit) -> Optional[List[str]]:
    if split.category_of is None:
        return None
    return [split.category_name(category) for category in range(split.num_categories)]


def _confusion(split: DatasetSplit, truth: np.ndarray, predictions: np.ndarray) -> ConfusionMatrix:
    return build_confusion(
        truth,
        predictions,
        split.num_classes,
        category_of=split.category_of,
        class_ids=split.class_ids,
        category_names=_category_names(split),
    )


async def execute_plans(ctx: TaskContext, plans: List[RunPlan]) -> List[RunRecord]:
    """Execute all plans, at most settings.max_parallel_runs at a time. Returns the records in plan order."""
    semaphore = asyncio.Semaphore(ctx.settings.max_parallel_runs)

    async def execute_guarded(plan: RunPlan) -> None:
        async with semaphore:
            await ctx.exec(plan.name, execute_run, plan)

    async with asyncio.TaskGroup() as group:
        for plan in plans:
            group.create_task(execute_guarded(plan))

    records = {record.name: record for record in ctx.collect_records()}
    return [records[plan.name] for plan in plans]


async def run_study(
    kind: ExperimentKind,
    config: ExperimentConfig,
    sources: DataSources,
    planner: Planner,
    out_root: Path,
    settings: HarnessSettings,
    resume: bool = False,
) -> ExperimentRecord:
    """Plan and execute the runs of one experiment, then write its tables, figures and record.

    An experiment whose runs all completed before is returned as stored, without any training.
    """
    store = ResultsStore(out_root, kind, config, sources.manifest_hash)
    if (existing := store.open(resume)) is not None:
        return existing

    plans = planner(config, sources)
    ctx = TaskContextImpl(config, settings, logger.getChild(store.experiment_id), store)
    ctx.logger.info("Executing %d runs", len(plans))
    runs = await execute_plans(ctx, plans)
    return finish_experiment(store, runs)


def finish_experiment(store: ResultsStore, runs: List[RunRecord]) -> ExperimentRecord:
    summary = write_report(store.experiment_dir, store.kind, store.config, runs)
    record = store.build_record(runs, summary)
    store.write_record(record)
    if record.complete:
        logger.info('Experiment "%s" completed, results in "%s"', store.experiment_id, store.experiment_dir)
    else:
        logger.warning(
            'Experiment "%s" has failed runs %s; rerun with --resume to retry them',
            store.experiment_id,
            record.failed_runs,
        )
    return record
