from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from multicat.analytics.confusion import ErrorRate, LeakageReport
from multicat.labeling import LabelScheme
from multicat.types import ExperimentConfig


class ExperimentKind(str, Enum):
    SAMPLE = "sample"
    TRAIN = "train"
    EVALUATE = "evaluate"
    SCALING = "scaling"
    SHARED_VS_SEPARATE = "shared-vs-separate"
    LABEL_COMPARE = "label-compare"


class RunState(str, Enum):
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"


class RunRecord(BaseModel):
    """Result of one training run. Written as run.json into the run directory once the run completed."""

    name: str = Field(description="Run name, unique within the experiment; also the run directory name.")
    state: RunState = Field(description="COMPLETED or FAILED.")
    message: Optional[str] = Field(default=None, description="Failure message of a FAILED run.")
    tags: Dict[str, str | int] = Field(
        default_factory=dict, description="Study coordinates of the run, e.g. size and replicate."
    )
    seed: Optional[int] = Field(default=None, description="Seed of initialization, shuffling and augmentation.")
    label_scheme: Optional[LabelScheme] = Field(default=None, description="Label scheme the network was trained with.")
    class_ids: List[str] = Field(default_factory=list, description="Class ids in class index order.")
    category_names: Optional[List[str]] = Field(default=None, description="Category names in category index order.")
    train_images: int = Field(default=0, description="Number of training images.")
    test_images: int = Field(default=0, description="Number of test images.")
    error: Optional[ErrorRate] = Field(default=None, description="Multi-crop top-1 error on the test side.")
    joint_error: Optional[ErrorRate] = Field(
        default=None, description="Multi-crop error with the joint decode rule (class/category labels only)."
    )
    leakage: Optional[LeakageReport] = Field(default=None, description="Error decomposition for runs with categories.")
    started: Optional[datetime] = Field(default=None, description="Start of the run.")
    finished: Optional[datetime] = Field(default=None, description="End of the run.")

    @property
    def completed(self) -> bool:
        return self.state == RunState.COMPLETED


class ExperimentRecord(BaseModel):
    """
    Experiment record

    Provenance and results of one experiment. Written as record.json; immutable once all runs completed.
    """

    experiment_id: str = Field(description="<kind>-<first 12 hex digits of the config hash>.")
    kind: ExperimentKind = Field(description="Experiment type.")
    harness_version: str = Field(description="Version of multicat that produced the record.")
    config: ExperimentConfig = Field(description="Full configuration snapshot.")
    config_hash: str = Field(description="SHA-256 over config, manifest hash and kind.")
    lineage_hash: str = Field(description="Like config_hash, but with every seed removed.")
    manifest_hash: Optional[str] = Field(default=None, description="SHA-256 of the manifest file.")
    created: datetime = Field(description="Creation of the experiment directory.")
    finished: datetime = Field(description="End of the last invocation.")
    runs: List[RunRecord] = Field(default_factory=list, description="All runs in plan order.")
    summary: Dict[str, float] = Field(default_factory=dict, description="Headline numbers of the emitted tables.")

    @property
    def failed_runs(self) -> List[str]:
        return [run.name for run in self.runs if not run.completed]

    @property
    def complete(self) -> bool:
        return not self.failed_runs
