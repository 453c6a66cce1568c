import pandas as pd
from pytest import raises

from multicat.analytics.confusion import CONFUSION_FILENAME
from multicat.analytics.tables import (
    FIGURE2_FILENAME,
    FIGURE3_FILENAME,
    PER_CLASS_DELTAS_FILENAME,
    TABLE2_FILENAME,
    TABLE3_FILENAME,
    TABLE4_FILENAME,
    TABLE5_FILENAME,
)
from multicat.data.split import read_split_csv
from multicat.exception import UserInputError
from multicat.experiments.records import ExperimentKind
from multicat.experiments.report import (
    CLASS_CATEGORY_RUN,
    CLASS_ONLY_RUN,
    JOINT_CONFUSION_FILENAME,
    SHARED_RUN,
    emit_figure,
    report_experiment,
)
from multicat.experiments.sources import grouped_split, open_sources
from multicat.experiments.store import FIGURES_DIRNAME, RUNS_DIRNAME, SPLITS_DIRNAME, TABLES_DIRNAME
from multicat.experiments.studies import (
    GROUPED_SPLIT_NAME,
    TRAIN_RUN,
    run_evaluation,
    run_label_comparison,
    run_scaling,
    run_shared_vs_separate,
    run_training,
    sample_datasets,
    scaling_run_name,
)
from multicat.model.checkpoint import CHECKPOINT_FILENAME, CheckpointError


async def test_shared_vs_separate(toy_config, settings, path_work):
    record = await run_shared_vs_separate(toy_config, path_work, settings)
    assert record.complete
    assert record.kind == ExperimentKind.SHARED_VS_SEPARATE
    assert [run.name for run in record.runs] == [SHARED_RUN, "category-00-hue_00", "category-01-hue_01"]
    assert record.runs[1].class_ids == ["c00_00", "c00_01", "c00_02"]
    assert record.runs[1].seed == record.runs[0].seed

    experiment_dir = path_work / record.experiment_id
    for filename in (TABLE3_FILENAME, TABLE4_FILENAME, PER_CLASS_DELTAS_FILENAME):
        assert (experiment_dir / TABLES_DIRNAME / filename).is_file()
    table3 = pd.read_csv(experiment_dir / TABLES_DIRNAME / TABLE3_FILENAME)
    assert list(table3.columns)[1:] == ["hue_00", "hue_01", "Avg."]
    assert abs(table3["Avg."][1] - record.summary["shared_error_percent"]) < 1e-3

    leakage = record.runs[0].leakage
    assert leakage.total_error.numerator == (
        leakage.inter_category_error.numerator + leakage.within_category_error.numerator
    )

    assert report_experiment(experiment_dir) == record.summary
    assert emit_figure(experiment_dir, 3) == experiment_dir / FIGURES_DIRNAME / FIGURE3_FILENAME
    histogram = pd.read_csv(experiment_dir / FIGURES_DIRNAME / FIGURE3_FILENAME)
    assert histogram["count"].sum() == 6
    assert (experiment_dir / FIGURES_DIRNAME / FIGURE2_FILENAME).is_file()
    with raises(UserInputError):
        emit_figure(experiment_dir, 1)
    with raises(UserInputError):
        emit_figure(experiment_dir, 4)

    again = await run_shared_vs_separate(toy_config, path_work, settings)
    assert again.finished == record.finished
    assert again.summary == record.summary


async def test_label_comparison(toy_config, settings, path_work):
    record = await run_label_comparison(toy_config, path_work, settings)
    assert record.complete
    assert [run.name for run in record.runs] == [CLASS_ONLY_RUN, CLASS_CATEGORY_RUN]
    assert record.runs[1].label_scheme.width == 8
    assert record.runs[0].joint_error is None
    assert record.runs[1].joint_error is not None

    experiment_dir = path_work / record.experiment_id
    assert (experiment_dir / RUNS_DIRNAME / CLASS_CATEGORY_RUN / JOINT_CONFUSION_FILENAME).is_file()
    table5 = pd.read_csv(experiment_dir / TABLES_DIRNAME / TABLE5_FILENAME)
    assert table5.iloc[:, 0].tolist() == [
        "Class labels",
        "Class/Category labels",
        "Class/Category labels, joint decode",
    ]
    assert abs(table5["error_percent"][2] - record.runs[1].joint_error.percent) < 1e-4
    assert abs(
        record.summary["improvement_pp"]
        - (record.summary["class_only_error_percent"] - record.summary["class_category_error_percent"])
    ) < 1e-9


async def test_scaling(toy_config, settings, path_work):
    record = await run_scaling(toy_config, path_work, settings)
    assert record.complete
    assert [run.name for run in record.runs] == [
        scaling_run_name(2, 0),
        scaling_run_name(2, 1),
        scaling_run_name(4, 0),
    ]
    assert [run.label_scheme.num_classes for run in record.runs] == [2, 2, 4]
    assert record.runs[0].seed != record.runs[1].seed

    table2 = pd.read_csv(path_work / record.experiment_id / TABLES_DIRNAME / TABLE2_FILENAME)
    assert table2["replicates"].tolist() == [2, 1]
    assert table2["completed_runs"].tolist() == [2, 1]


async def test_train_then_evaluate(toy_config, settings, path_work):
    trained = await run_training(toy_config, path_work, settings)
    assert trained.complete
    checkpoint = path_work / trained.experiment_id / RUNS_DIRNAME / TRAIN_RUN / CHECKPOINT_FILENAME
    assert checkpoint.is_file()
    assert (checkpoint.parent / CONFUSION_FILENAME).is_file()

    evaluated = await run_evaluation(toy_config, checkpoint, path_work, settings)
    assert evaluated.complete
    assert evaluated.kind == ExperimentKind.EVALUATE
    assert evaluated.runs[0].error == trained.runs[0].error

    with raises(CheckpointError):
        await run_evaluation(toy_config, path_work / "missing.pt", path_work, settings)


def test_sample_datasets(toy_config, path_work):
    record = sample_datasets(toy_config, path_work)
    assert record.summary["splits"] == 4
    splits_dir = path_work / record.experiment_id / SPLITS_DIRNAME
    grouped = read_split_csv(splits_dir / f"{GROUPED_SPLIT_NAME}.csv")
    assert grouped == grouped_split(toy_config, open_sources(toy_config))
    assert sorted(path.name for path in splits_dir.iterdir()) == [
        f"{GROUPED_SPLIT_NAME}.csv",
        f"{scaling_run_name(2, 0)}.csv",
        f"{scaling_run_name(2, 1)}.csv",
        f"{scaling_run_name(4, 0)}.csv",
    ]
