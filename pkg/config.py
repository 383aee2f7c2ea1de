"""Runtime settings, read from SPLITKIT_* environment variables or a .env file."""
from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


DEFAULT_BUDGET = 2_000_000


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="SPLITKIT_",
        env_file=".env",
        extra="ignore",
    )

    budget: int = DEFAULT_BUDGET
    inner_radius: int = 1
    probe_radius: int = 4
    translate_length: int = 2
    tree_radius: int = 1
    max_rounds: int = 3
    shortlex_budget: int = 200_000
    timeout_s: float = 300.0
    log_level: str = "WARNING"


@lru_cache
def get_settings() -> Settings:
    """Return the process-wide settings object."""
    return Settings()
