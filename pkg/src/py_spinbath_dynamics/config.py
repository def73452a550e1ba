"""
Application settings management.

This module defines the process-level settings of the simulator, leveraging
Pydantic's `BaseSettings` for environment variable loading. Per-run physics
lives in scenario files (see `scenario.py`), not here.
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    # Settings may come from a .env file; every variable carries the 'PSD_' prefix.
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", extra="ignore", env_prefix="PSD_"
    )

    out_dir: str = "results"
    threads: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    propagator_tolerance: float = Field(default=1e-12, gt=0)
    norm_atol: float = Field(default=1e-12, gt=0)
    density_atol: float = Field(default=1e-9, gt=0)
    dense_max_spins: int = Field(default=10, ge=1)
    points_per_period: int = Field(default=20, ge=10)
