"""Workbench settings configuration."""

from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Workbench settings."""

    model_config = SettingsConfigDict(
        env_prefix="KBSM_", env_file=".env", case_sensitive=False, extra="ignore"
    )

    # Application
    app_name: str = "KBS Machine Workbench"
    debug: bool = Field(default=False)
    log_level: str = Field(default="INFO")
    log_file: str | None = Field(default=None)

    # Deterministic machine and oracle
    eval_budget: int = Field(default=100_000, ge=1)
    oracle_budget: int = Field(default=100_000, ge=1)
    normalize_budget: int = Field(default=10_000, ge=1)

    # Non-deterministic search
    max_steps: int = Field(default=100_000, ge=1)
    max_depth: int = Field(default=10_000, ge=1)
    max_outcomes: int | None = Field(default=None, ge=1)
    strategy: Literal["bfs", "dfs"] = Field(default="dfs")

    # Ports and rewrite tables
    rewrite_step_cap: int = Field(default=10_000, ge=1)
    check_workers: int = Field(default=1, ge=1)

    # Inference
    inference_max_states: int = Field(default=100_000, ge=1)

    # HTTP surface
    host: str = Field(default="127.0.0.1")
    port: int = Field(default=8000)
    metrics_enabled: bool = Field(default=True)


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
