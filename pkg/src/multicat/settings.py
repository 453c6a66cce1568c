from functools import lru_cache
from logging import getLogger
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# ENV file should be in the working directory (only relevant for development; otherwise use ENV variables).
ENV_FILE = Path.cwd() / ".env"


# Harness settings are read from the environment (prefix MULTICAT_) and validated on first use.
class HarnessSettings(BaseSettings):
    device: str = Field(default="cpu", description="Torch device used for training and evaluation, e.g. 'cuda:0'.")
    num_workers: int = Field(
        default=0,
        ge=0,
        description="Data loading worker processes. 0 loads in the main process (reference single-threaded backend).",
    )
    deterministic: bool = Field(
        default=True, description="Restrict torch to deterministic kernels and a single intra-op thread on CPU."
    )
    max_parallel_runs: int = Field(default=1, ge=1, description="Runs of one study that may train concurrently.")

    model_config = SettingsConfigDict(env_prefix="MULTICAT_", env_file=ENV_FILE, extra="ignore")


@lru_cache(maxsize=1)
def get_settings() -> HarnessSettings:
    settings = HarnessSettings()
    getLogger(__name__).info("Harness settings: %s", settings.model_dump())
    return settings
