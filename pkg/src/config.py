from __future__ import annotations

from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process configuration loaded from environment variables.

    Prefix: TERMINERF_

    Examples:
      TERMINERF_LOG_LEVEL=DEBUG
      TERMINERF_RENDER_WORKERS=4

    Run parameters (sample counts, learning rates, ...) are not settings;
    they live in TrainConfig / RenderConfig and travel with the run.
    """

    model_config = SettingsConfigDict(
        env_prefix="TERMINERF_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # General
    env: Literal["dev", "ci", "prod"] = Field(
        "dev",
        description="Deployment environment name.",
    )
    app_name: str = Field(
        "terminerf-toolkit",
        description="Human-friendly app name, attached to every log line.",
    )
    log_level: str = Field(
        "INFO",
        description="Base log level (DEBUG, INFO, WARNING, ERROR).",
    )
    log_format: Literal["json", "console"] = Field(
        "json",
        description="structlog renderer.",
    )

    # Rendering
    render_workers: int = Field(
        1,
        ge=1,
        description="Thread count used to render ray chunks of one image.",
    )
    render_chunk_rays: int = Field(
        1024,
        ge=1,
        description="Rays per vectorized render chunk.",
    )

    # Outputs
    record_wall_time: bool = Field(
        False,
        description="Fill wall-clock columns in CSV outputs. Off keeps reruns byte-identical.",
    )
    metrics_textfile: bool = Field(
        True,
        description="Write a Prometheus text exposition (metrics.prom) next to CLI outputs.",
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Cached singleton settings object.

    Usage:
        from src.config import get_settings
        settings = get_settings()
    """
    return Settings()
