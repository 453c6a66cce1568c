from abc import ABC, abstractmethod
from logging import Logger
from pathlib import Path, PurePosixPath
from typing import Awaitable, Callable, Concatenate, Iterator, Optional, Tuple

from multicat.experiments.records import RunRecord
from multicat.experiments.store import ResultsStore
from multicat.settings import HarnessSettings
from multicat.types import ExperimentConfig


class TaskContext(ABC):
    """Interface. A context provides a logger and supports executing runs as sub-tasks."""

    @property
    @abstractmethod
    def config(self) -> ExperimentConfig:
        """Return the configuration of this experiment."""

    @property
    @abstractmethod
    def settings(self) -> HarnessSettings:
        """Return the process settings (device, workers, parallelism)."""

    @property
    @abstractmethod
    def logger(self) -> Logger:
        """Return logger for this context."""

    @property
    @abstractmethod
    def store(self) -> ResultsStore:
        """Return the results store of the experiment (common to all TaskContexts in hierarchy)."""

    @property
    def experiment_path(self) -> Path:
        return self.store.experiment_dir

    @property
    @abstractmethod
    def run_path(self) -> Path:
        """Return the directory of this context's run. Created on first access; not available on the root context."""

    @property
    @abstractmethod
    def children(self) -> list["TaskContext"]:
        """Return all child TaskContexts."""

    @property
    @abstractmethod
    def name_parts(self) -> list[str]:
        """Return all name parts coming from the TaskContext hierarchy."""

    @property
    @abstractmethod
    def qualified_path(self) -> PurePosixPath:
        """Return a qualified path containing of all the name parts."""

    @property
    @abstractmethod
    def run_name(self) -> str:
        """Return the last name part identifying the run."""

    @property
    @abstractmethod
    def record(self) -> Optional[RunRecord]:
        """Return the run record attached to the TaskContext."""

    @abstractmethod
    def collect_records(self) -> Iterator[RunRecord]:
        """Return the run records of this TaskContext and all its children using depth-first traversal."""

    @abstractmethod
    async def exec[**P](
        self,
        run_name: str,
        task_fn: Callable[Concatenate["TaskContext", P], Awaitable[RunRecord]],
        *args: P.args,
        **kwargs: P.kwargs,
    ) -> None:
        """Execute a run, storing its record in a sub-context.
        Contrary to exec_with_result() any occurring errors are caught, logged and stored as a FAILED record."""

    @abstractmethod
    async def exec_with_result[**P](
        self,
        run_name: str,
        task_fn: Callable[Concatenate["TaskContext", P], Awaitable[RunRecord]],
        *args: P.args,
        **kwargs: P.kwargs,
    ) -> Tuple["TaskContext", RunRecord]:
        """Execute a run in a new sub-context and return the sub-context and the run record.
        A run completed by an earlier invocation is not executed again, its stored record is returned.
        Contrary to method exec() any errors occurring in the run must be handled by the caller."""
