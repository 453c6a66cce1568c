from datetime import UTC, datetime
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from multicat import __version__
from multicat.experiments.records import ExperimentKind, ExperimentRecord, RunRecord
from multicat.file import TEXT_ENCODING, build_real_sub_path, hash_json, sanitize_file_part, write_text_atomic
from multicat.types import ExperimentConfig

logger = getLogger(__name__)

CONFIG_FILENAME = "config.json"
RECORD_FILENAME = "record.json"
RUN_RECORD_FILENAME = "run.json"
RUN_LOG_FILENAME = "run.log"
RUNS_DIRNAME = "runs"
TABLES_DIRNAME = "tables"
FIGURES_DIRNAME = "figures"
SPLITS_DIRNAME = "splits"
EXPERIMENT_ID_HEX_DIGITS = 12


class ExperimentStateError(RuntimeError):
    """Raised when an experiment directory can not be (re)used as requested."""


def strip_seeds(data: Any) -> Any:
    """Copy of a JSON-like tree without any "seed" keys."""
    if isinstance(data, dict):
        return {key: strip_seeds(value) for key, value in data.items() if key != "seed"}
    if isinstance(data, list):
        return [strip_seeds(value) for value in data]
    return data


def config_hash(
    config: ExperimentConfig,
    manifest_hash: Optional[str],
    kind: ExperimentKind,
    inputs: Optional[Dict[str, str]] = None,
) -> str:
    """inputs holds hashes of further input files, e.g. the checkpoint of an evaluation."""
    return hash_json(
        {"config": config.model_dump(mode="json"), "manifest_hash": manifest_hash, "kind": kind.value, "inputs": inputs}
    )


def lineage_hash(
    config: ExperimentConfig,
    manifest_hash: Optional[str],
    kind: ExperimentKind,
    inputs: Optional[Dict[str, str]] = None,
) -> str:
    return hash_json(
        {
            "config": strip_seeds(config.model_dump(mode="json")),
            "manifest_hash": manifest_hash,
            "kind": kind.value,
            "inputs": inputs,
        }
    )


class ResultsStore:
    """
    Results store

    One directory per experiment id below the output root:
    config.json, record.json, tables/, figures/, splits/ and runs/<run name>/.
    """

    def __init__(
        self,
        out_root: Path,
        kind: ExperimentKind,
        config: ExperimentConfig,
        manifest_hash: Optional[str] = None,
        inputs: Optional[Dict[str, str]] = None,
    ):
        self.kind = kind
        self.config = config
        self.manifest_hash = manifest_hash
        self.inputs = inputs
        self.config_hash = config_hash(config, manifest_hash, kind, inputs)
        self.lineage_hash = lineage_hash(config, manifest_hash, kind, inputs)
        self.experiment_id = f"{kind.value}-{self.config_hash[:EXPERIMENT_ID_HEX_DIGITS]}"
        self.experiment_dir = out_root / self.experiment_id
        self.created = datetime.now(tz=UTC)

    @property
    def runs_dir(self) -> Path:
        return self.experiment_dir / RUNS_DIRNAME

    @property
    def tables_dir(self) -> Path:
        return self.experiment_dir / TABLES_DIRNAME

    @property
    def figures_dir(self) -> Path:
        return self.experiment_dir / FIGURES_DIRNAME

    @property
    def splits_dir(self) -> Path:
        return self.experiment_dir / SPLITS_DIRNAME

    def open(self, resume: bool) -> Optional[ExperimentRecord]:
        """Create the experiment directory or check an existing one.

        Returns the stored record if the experiment already completed. An existing directory with
        incomplete runs is only reused with resume set.
        """
        config_path = self.experiment_dir / CONFIG_FILENAME
        if not self.experiment_dir.exists():
            self.experiment_dir.mkdir(parents=True)
            write_text_atomic(config_path, self.config.model_dump_json(indent=2))
            logger.info('Created experiment directory "%s"', self.experiment_dir)
            return None

        if config_path.is_file():
            stored = ExperimentConfig.model_validate_json(config_path.read_bytes())
            if config_hash(stored, self.manifest_hash, self.kind, self.inputs) != self.config_hash:
                raise ExperimentStateError(f'"{self.experiment_dir}" holds an experiment with a different config')
        else:
            write_text_atomic(config_path, self.config.model_dump_json(indent=2))

        record = self.read_record()
        if record is not None:
            self.created = record.created
            if record.complete:
                logger.info('Experiment "%s" is complete, nothing to do', self.experiment_id)
                return record
        if not resume:
            raise ExperimentStateError(
                f'"{self.experiment_dir}" holds an experiment with incomplete runs; pass --resume to continue it'
            )
        logger.info('Resuming experiment "%s"', self.experiment_id)
        return None

    def run_dir(self, run_name: str) -> Path:
        path = build_real_sub_path(self.runs_dir, sanitize_file_part(run_name))
        path.mkdir(parents=True, exist_ok=True)
        return path

    def completed_run(self, run_name: str) -> Optional[RunRecord]:
        """The stored record of a run, if it completed."""
        path = self.runs_dir / sanitize_file_part(run_name) / RUN_RECORD_FILENAME
        if not path.is_file():
            return None
        try:
            record = RunRecord.model_validate_json(path.read_bytes())
        except ValidationError:
            logger.warning('Ignoring unreadable run record "%s"', path)
            return None
        return record if record.completed else None

    def write_run(self, record: RunRecord) -> None:
        write_text_atomic(self.run_dir(record.name) / RUN_RECORD_FILENAME, record.model_dump_json(indent=2))

    def read_record(self) -> Optional[ExperimentRecord]:
        return read_experiment_record(self.experiment_dir)

    def build_record(self, runs: list[RunRecord], summary: dict[str, float]) -> ExperimentRecord:
        return ExperimentRecord(
            experiment_id=self.experiment_id,
            kind=self.kind,
            harness_version=__version__,
            config=self.config,
            config_hash=self.config_hash,
            lineage_hash=self.lineage_hash,
            manifest_hash=self.manifest_hash,
            created=self.created,
            finished=datetime.now(tz=UTC),
            runs=runs,
            summary=summary,
        )

    def write_record(self, record: ExperimentRecord) -> None:
        write_text_atomic(self.experiment_dir / RECORD_FILENAME, record.model_dump_json(indent=2))


def read_experiment_record(experiment_dir: Path) -> Optional[ExperimentRecord]:
    path = experiment_dir / RECORD_FILENAME
    if not path.is_file():
        return None
    return ExperimentRecord.model_validate_json(path.read_text(encoding=TEXT_ENCODING))
