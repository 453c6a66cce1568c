import logging
from logging import getLogger
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, CliApp, CliImplicitFlag, CliPositionalArg, CliSubCommand

from multicat import __version__
from multicat.data.cifar import export_cifar100
from multicat.data.synthetic import make_toy_pool
from multicat.experiments.presets import DEFAULT_CIFAR_POOL, DEFAULT_TOY_POOL, load_experiment_config
from multicat.experiments.records import ExperimentRecord
from multicat.experiments.report import emit_figure, report_experiment
from multicat.experiments.studies import (
    run_evaluation,
    run_label_comparison,
    run_scaling,
    run_shared_vs_separate,
    run_training,
    sample_datasets,
)
from multicat.settings import get_settings
from multicat.types import ExperimentConfig, Preset

logger = getLogger("multicat.cli")


def config_logging():
    logging.basicConfig(level=logging.INFO, format="%(asctime)s | %(levelname)s | %(name)s - %(message)s")


class ExperimentArgs(BaseModel):
    config: Optional[Path] = Field(default=None, description="JSON experiment config, deep-merged over the preset.")
    seed: Optional[int] = Field(default=None, description="Experiment seed, overrides the config.")
    out: Path = Field(default=Path("results"), description="Directory holding one sub directory per experiment.")
    preset: Optional[Preset] = Field(
        default=None, description="Preset the config is merged over (default: the config's preset, else toy)."
    )
    resume: CliImplicitFlag[bool] = Field(
        default=False, description="Continue an experiment directory with incomplete runs."
    )

    def experiment_config(self) -> ExperimentConfig:
        return load_experiment_config(self.preset, self.config, self.seed)


def log_record(record: ExperimentRecord) -> None:
    logger.info('Experiment "%s": %d runs, %d failed', record.experiment_id, len(record.runs), len(record.failed_runs))
    for key, value in record.summary.items():
        logger.info("  %s = %g", key, value)


class SampleCommand(ExperimentArgs):
    """Draw the datasets of the configured experiment and write them as split CSVs."""

    async def cli_cmd(self) -> None:
        log_record(sample_datasets(self.experiment_config(), self.out, self.resume))


class TrainCommand(ExperimentArgs):
    """Train one network on the grouped split with the configured label scheme."""

    async def cli_cmd(self) -> None:
        log_record(await run_training(self.experiment_config(), self.out, get_settings(), self.resume))


class EvaluateCommand(ExperimentArgs):
    """Multi-crop evaluation of a checkpoint on the test side of the grouped split."""

    checkpoint: Path = Field(description="Checkpoint written by a training run.")

    async def cli_cmd(self) -> None:
        log_record(
            await run_evaluation(self.experiment_config(), self.checkpoint, self.out, get_settings(), self.resume)
        )


class ScalingCommand(ExperimentArgs):
    """Error against number of classes."""

    async def cli_cmd(self) -> None:
        log_record(await run_scaling(self.experiment_config(), self.out, get_settings(), self.resume))


class SharedVsSeparateCommand(ExperimentArgs):
    """One shared network against one network per category."""

    async def cli_cmd(self) -> None:
        log_record(await run_shared_vs_separate(self.experiment_config(), self.out, get_settings(), self.resume))


class LabelCompareCommand(ExperimentArgs):
    """Class labels against combined class/category labels."""

    async def cli_cmd(self) -> None:
        log_record(await run_label_comparison(self.experiment_config(), self.out, get_settings(), self.resume))


class ReportCommand(BaseModel):
    """Recompute all tables and figure data of an experiment from its stored confusion matrices."""

    experiment: Path = Field(description="Experiment directory.")

    def cli_cmd(self) -> None:
        summary = report_experiment(self.experiment)
        for key, value in summary.items():
            logger.info("%s = %g", key, value)


class EmitFigureCommand(BaseModel):
    """Recompute the data of figure 1, 2 or 3 of an experiment."""

    figure: CliPositionalArg[int] = Field(description="Figure number: 1 (scaling), 2 or 3 (shared vs separate).")
    experiment: Path = Field(description="Experiment directory.")

    def cli_cmd(self) -> None:
        logger.info('Wrote "%s"', emit_figure(self.experiment, self.figure))


class PrepareCifarCommand(BaseModel):
    """Download CIFAR-100 and write it as an image folder pool."""

    pool_root: Path = Field(default=Path(DEFAULT_CIFAR_POOL), description="Directory of the written pool.")
    download_root: Path = Field(default=Path("data/downloads"), description="Directory of the CIFAR-100 archive.")

    def cli_cmd(self) -> None:
        export_cifar100(self.download_root, self.pool_root)


class MakeToyPoolCommand(BaseModel):
    """Write the synthetic 10 x 10 pool used by the toy preset."""

    pool_root: Path = Field(default=Path(DEFAULT_TOY_POOL), description="Directory of the written pool.")
    seed: int = Field(default=0, description="Seed of the image noise.")

    def cli_cmd(self) -> None:
        make_toy_pool(self.pool_root, seed=self.seed)


class CommandLineInterface(
    BaseSettings, cli_parse_args=True, cli_prog_name="multicat", cli_kebab_case=True, env_prefix="MULTICAT_CLI_"
):
    sample: CliSubCommand[SampleCommand]
    train: CliSubCommand[TrainCommand]
    evaluate: CliSubCommand[EvaluateCommand]
    scaling: CliSubCommand[ScalingCommand]
    shared_vs_separate: CliSubCommand[SharedVsSeparateCommand]
    label_compare: CliSubCommand[LabelCompareCommand]
    report: CliSubCommand[ReportCommand]
    emit_figure: CliSubCommand[EmitFigureCommand]
    prepare_cifar: CliSubCommand[PrepareCifarCommand]
    make_toy_pool: CliSubCommand[MakeToyPoolCommand]

    def cli_cmd(self) -> None:
        logger.info("multicat %s", __version__)
        CliApp.run_subcommand(self)


def command_line_interface():
    config_logging()
    CliApp.run(CommandLineInterface)


if __name__ == "__main__":
    command_line_interface()
