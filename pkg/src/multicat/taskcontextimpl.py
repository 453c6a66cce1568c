import asyncio
import logging
import warnings
from contextlib import closing, contextmanager
from datetime import UTC, datetime
from logging import Logger
from pathlib import Path, PurePosixPath
from tempfile import TemporaryDirectory
from typing import Awaitable, Callable, Concatenate, Iterator, Optional, Tuple

from multicat.experiments.records import ExperimentKind, RunRecord, RunState
from multicat.experiments.store import RUN_LOG_FILENAME, ResultsStore
from multicat.file import TEXT_ENCODING, sanitize_file_part
from multicat.settings import HarnessSettings
from multicat.taskcontext import TaskContext
from multicat.types import ExperimentConfig

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s - %(message)s"


class TaskContextImpl(TaskContext):
    """A context provides a logger and supports executing runs as sub-tasks."""

    def __init__(
        self,
        config: ExperimentConfig,
        settings: HarnessSettings,
        logger: Logger,
        store: ResultsStore,
        name_parts: Optional[list[str]] = None,
    ):
        self._config = config
        self._settings = settings
        self._logger = logger
        self._store = store
        self._name_parts = name_parts or []
        self._children: list[TaskContext] = []
        self._record: Optional[RunRecord] = None

        if not store.experiment_dir.is_dir():
            raise FileNotFoundError(f"Path '{store.experiment_dir}' doesn't exist or is not a directory!")

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def settings(self) -> HarnessSettings:
        return self._settings

    @property
    def logger(self) -> Logger:
        """Return logger for this context."""
        return self._logger

    @property
    def store(self) -> ResultsStore:
        return self._store

    @property
    def run_path(self) -> Path:
        return self._store.run_dir(self.run_name)

    @property
    def children(self) -> list[TaskContext]:
        return self._children

    @property
    def name_parts(self) -> list[str]:
        return self._name_parts

    @property
    def qualified_path(self) -> PurePosixPath:
        return PurePosixPath("/".join(self._name_parts))

    @property
    def run_name(self) -> str:
        if not self.name_parts:
            raise RuntimeError("Can not give run name for root TaskContext")
        return self.name_parts[-1]

    @property
    def record(self) -> Optional[RunRecord]:
        return self._record

    def collect_records(self) -> Iterator[RunRecord]:
        if own_record := self.record:
            yield own_record

        for child in self.children:
            yield from child.collect_records()

    async def exec[**P](
        self,
        run_name: str,
        task_fn: Callable[Concatenate[TaskContext, P], Awaitable[RunRecord]],
        *args: P.args,
        **kwargs: P.kwargs,
    ) -> None:
        """Execute a run and store its record. Catch and log any errors."""

        try:
            await self.exec_with_result(run_name, task_fn, *args, **kwargs)
        except Exception as exception:
            self.logger.error('Run "%s" failed, continuing anyways...', run_name, exc_info=exception)
            warnings.warn(f'Run "{run_name}" failed: {exception}')
            return

    async def exec_with_result[**P](
        self,
        run_name: str,
        task_fn: Callable[Concatenate[TaskContext, P], Awaitable[RunRecord]],
        *args: P.args,
        **kwargs: P.kwargs,
    ) -> Tuple[TaskContext, RunRecord]:
        """Execute a run in a sub-context, store the record and return it."""

        # Short sleep allows the task to be cancelled
        await asyncio.sleep(0.001)

        run_name = sanitize_file_part(run_name)
        child_context = self._prepare_sub_context(run_name)

        if (completed := self._store.completed_run(run_name)) is not None:
            child_context.logger.info("Run was completed before, skipping.")
            child_context._put_record(completed)
            return child_context, completed

        started = datetime.now(tz=UTC)
        with init_file_logger(child_context.run_path / RUN_LOG_FILENAME, child_context.logger):
            try:
                record = await task_fn(child_context, *args, **kwargs)
            except Exception as exception:
                child_context.logger.error("Error", exc_info=exception)
                child_context._put_record(
                    RunRecord(
                        name=run_name,
                        state=RunState.FAILED,
                        message=f"{type(exception).__name__}: {exception}",
                        started=started,
                        finished=datetime.now(tz=UTC),
                    )
                )
                raise exception

            if record.name != run_name:
                child_context.logger.error("Task function returned the record of run %s.", record.name)
                raise RuntimeError(f'Task function returned the record of run "{record.name}" instead of "{run_name}"')
            child_context._put_record(record)
            if record.completed:
                self._store.write_run(record)
                child_context.logger.info("Run completed.")
        return child_context, record

    def _prepare_sub_context(self, run_name: str) -> "TaskContextImpl":
        child_name_parts = self.name_parts + [run_name]
        new_logger = self.logger.getChild(run_name)
        sub_context = TaskContextImpl(self._config, self._settings, new_logger, self._store, child_name_parts)
        self.children.append(sub_context)
        return sub_context

    def _put_record(self, record: RunRecord):
        if self._record:
            raise RuntimeError(
                "There is already a record in this context. You need to put exactly one record into a run context!"
            )
        self._record = record


@contextmanager
def init_file_logger(log_path: Path, logger: Logger) -> Iterator[Logger]:
    """Additionally log the messages of logger to the given file. File is closed on contextmanager exit."""
    log_path.parent.mkdir(parents=True, exist_ok=True)
    previous_level = logger.level
    logger.setLevel(logging.DEBUG)
    with closing(logging.FileHandler(log_path, encoding=TEXT_ENCODING)) as file_handler:
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)
        try:
            yield logger
        finally:
            logger.removeHandler(file_handler)
            logger.setLevel(previous_level)


@contextmanager
def create_temporary_task_context(
    config: ExperimentConfig, settings: HarnessSettings, logger: Logger, kind: ExperimentKind = ExperimentKind.TRAIN
):
    with TemporaryDirectory() as work_dir:
        store = ResultsStore(Path(work_dir), kind, config)
        store.open(resume=False)
        yield TaskContextImpl(config=config, settings=settings, logger=logger, store=store)
