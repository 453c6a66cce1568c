import asyncio
from datetime import UTC, datetime
from logging import getLogger
from pathlib import Path
from typing import List, Optional, Tuple

from multicat.data.split import DatasetSplit, split_category, write_split_csv
from multicat.experiments.records import ExperimentKind, ExperimentRecord, RunRecord
from multicat.experiments.report import (
    CATEGORY_TAG,
    CLASS_CATEGORY_RUN,
    CLASS_ONLY_RUN,
    SHARED_RUN,
    SIZE_TAG,
    category_run_name,
)
from multicat.experiments.runner import RunPlan, finish_experiment, record_evaluation, run_study
from multicat.experiments.sources import (
    TRAINING_STREAM,
    DataSources,
    derive_seed,
    grouped_split,
    open_sources,
    scaling_splits,
)
from multicat.experiments.store import ResultsStore
from multicat.file import compute_sha256
from multicat.model.checkpoint import CheckpointError
from multicat.settings import HarnessSettings, get_settings
from multicat.taskcontext import TaskContext
from multicat.taskcontextimpl import TaskContextImpl
from multicat.training.evaluation import evaluate_checkpoint
from multicat.types import DecodeRule, ExperimentConfig, LabelConfig, LabelKind

logger = getLogger(__name__)

TRAIN_RUN = "train"
EVALUATE_RUN = "evaluate"
GROUPED_SPLIT_NAME = "grouped"
REPLICATE_TAG = "replicate"


def scaling_run_name(size: int, replicate: int) -> str:
    return f"size-{size:04d}-rep-{replicate:02d}"


def scaling_coordinates(config: ExperimentConfig) -> List[Tuple[int, int]]:
    """(size, replicate) of every run of the scaling study, in plan order."""
    dataset = config.dataset
    return [
        (size, replicate)
        for size, replicates in zip(dataset.scaling_sizes, dataset.scaling_replicates)
        for replicate in range(replicates)
    ]


def plan_scaling(config: ExperimentConfig, sources: DataSources) -> List[RunPlan]:
    plans = []
    for size, replicates in zip(config.dataset.scaling_sizes, config.dataset.scaling_replicates):
        for replicate, split in enumerate(scaling_splits(config, sources, size, replicates)):
            plans.append(
                RunPlan(
                    name=scaling_run_name(size, replicate),
                    split=split,
                    label=LabelConfig(kind=LabelKind.CLASS_ONLY),
                    seed=derive_seed(config.seed, TRAINING_STREAM, size, replicate),
                    tags={SIZE_TAG: size, REPLICATE_TAG: replicate},
                )
            )
    return plans


def plan_shared_vs_separate(config: ExperimentConfig, sources: DataSources) -> List[RunPlan]:
    """One shared network over all classes and one network per category, all from the same seed.

    With a single category both are the same network, so only the shared one is trained.
    """
    split = grouped_split(config, sources)
    seed = derive_seed(config.seed, TRAINING_STREAM)
    label = LabelConfig(kind=LabelKind.CLASS_ONLY)
    plans = [RunPlan(name=SHARED_RUN, split=split, label=label, seed=seed)]
    if split.num_categories > 1:
        for category in range(split.num_categories):
            plans.append(
                RunPlan(
                    name=category_run_name(category, split.category_name(category)),
                    split=split_category(split, category),
                    label=label,
                    seed=seed,
                    tags={CATEGORY_TAG: category},
                )
            )
    return plans


def plan_label_comparison(config: ExperimentConfig, sources: DataSources) -> List[RunPlan]:
    """Two shared networks on the same split and seed that differ only in their label scheme."""
    split = grouped_split(config, sources)
    seed = derive_seed(config.seed, TRAINING_STREAM)
    return [
        RunPlan(name=CLASS_ONLY_RUN, split=split, label=LabelConfig(kind=LabelKind.CLASS_ONLY), seed=seed),
        RunPlan(
            name=CLASS_CATEGORY_RUN,
            split=split,
            label=LabelConfig(kind=LabelKind.CLASS_CATEGORY, decode_rule=DecodeRule.CLASS_SLOTS),
            seed=seed,
        ),
    ]


def plan_training(config: ExperimentConfig, sources: DataSources) -> List[RunPlan]:
    return [
        RunPlan(
            name=TRAIN_RUN,
            split=grouped_split(config, sources),
            label=config.train.label,
            seed=derive_seed(config.seed, TRAINING_STREAM),
        )
    ]


async def run_scaling(
    config: ExperimentConfig, out_root: Path, settings: Optional[HarnessSettings] = None, resume: bool = False
) -> ExperimentRecord:
    """Error against class count: one network per (size, replicate), averaged per size."""
    sources = open_sources(config)
    return await run_study(
        ExperimentKind.SCALING, config, sources, plan_scaling, out_root, settings or get_settings(), resume
    )


async def run_shared_vs_separate(
    config: ExperimentConfig, out_root: Path, settings: Optional[HarnessSettings] = None, resume: bool = False
) -> ExperimentRecord:
    """Shared network against one network per category, with leakage and per-class deltas."""
    sources = open_sources(config)
    return await run_study(
        ExperimentKind.SHARED_VS_SEPARATE,
        config,
        sources,
        plan_shared_vs_separate,
        out_root,
        settings or get_settings(),
        resume,
    )


async def run_label_comparison(
    config: ExperimentConfig, out_root: Path, settings: Optional[HarnessSettings] = None, resume: bool = False
) -> ExperimentRecord:
    """Class labels against class/category labels on the same data and seed."""
    sources = open_sources(config)
    return await run_study(
        ExperimentKind.LABEL_COMPARE,
        config,
        sources,
        plan_label_comparison,
        out_root,
        settings or get_settings(),
        resume,
    )


async def run_training(
    config: ExperimentConfig, out_root: Path, settings: Optional[HarnessSettings] = None, resume: bool = False
) -> ExperimentRecord:
    """A single network on the grouped split with the configured label scheme."""
    sources = open_sources(config)
    return await run_study(
        ExperimentKind.TRAIN, config, sources, plan_training, out_root, settings or get_settings(), resume
    )


async def run_evaluation(
    config: ExperimentConfig,
    checkpoint_path: Path,
    out_root: Path,
    settings: Optional[HarnessSettings] = None,
    resume: bool = False,
) -> ExperimentRecord:
    """Multi-crop evaluation of a stored network on the test side of the grouped split."""
    if not checkpoint_path.is_file():
        raise CheckpointError(f'Checkpoint "{checkpoint_path}" does not exist')
    settings = settings or get_settings()
    sources = open_sources(config)
    store = ResultsStore(
        out_root,
        ExperimentKind.EVALUATE,
        config,
        sources.manifest_hash,
        inputs={"checkpoint": compute_sha256(checkpoint_path)},
    )
    if (existing := store.open(resume)) is not None:
        return existing

    ctx = TaskContextImpl(config, settings, logger.getChild(store.experiment_id), store)
    await ctx.exec(EVALUATE_RUN, _evaluate_run, checkpoint_path, grouped_split(config, sources))
    return finish_experiment(store, list(ctx.collect_records()))


async def _evaluate_run(ctx: TaskContext, checkpoint_path: Path, split: DatasetSplit) -> RunRecord:
    def evaluate_in_thread() -> RunRecord:
        started = datetime.now(tz=UTC)
        scheme, evaluation = evaluate_checkpoint(
            checkpoint_path,
            split.test_items,
            ctx.config.train.views,
            split.num_classes,
            ctx.settings.device,
            ctx.config.train.batch_size,
            ctx.settings.num_workers,
        )
        return record_evaluation(
            ctx.run_path, ctx.run_name, split, scheme, evaluation, ctx.logger, tags={}, started=started
        )

    return await asyncio.to_thread(evaluate_in_thread)


def sample_datasets(config: ExperimentConfig, out_root: Path, resume: bool = False) -> ExperimentRecord:
    """Resolve the grouped split and every scaling dataset and write them as split CSVs, without training."""
    sources = open_sources(config)
    store = ResultsStore(out_root, ExperimentKind.SAMPLE, config, sources.manifest_hash)
    if (existing := store.open(resume)) is not None:
        return existing

    write_split_csv(grouped_split(config, sources), store.splits_dir / f"{GROUPED_SPLIT_NAME}.csv")
    written = 1
    if sources.pool is not None:
        for size, replicates in zip(config.dataset.scaling_sizes, config.dataset.scaling_replicates):
            for replicate, split in enumerate(scaling_splits(config, sources, size, replicates)):
                write_split_csv(split, store.splits_dir / f"{scaling_run_name(size, replicate)}.csv")
                written += 1
    else:
        logger.info("No pool configured, only the grouped split was sampled")
    record = store.build_record([], {"splits": written})
    store.write_record(record)
    logger.info('Wrote %d splits to "%s"', written, store.splits_dir)
    return record
