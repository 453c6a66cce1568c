from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("multicat")
except PackageNotFoundError:
    __version__ = "0.0.0+unknown"

from .experiments.presets import load_experiment_config as load_experiment_config
from .experiments.studies import run_label_comparison as run_label_comparison
from .experiments.studies import run_scaling as run_scaling
from .experiments.studies import run_shared_vs_separate as run_shared_vs_separate
from .taskcontextimpl import create_temporary_task_context as create_temporary_task_context
from .types import ExperimentConfig as ExperimentConfig
