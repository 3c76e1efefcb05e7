from __future__ import annotations

import logging
import sys
from typing import Any, Mapping

import numpy as np
import structlog

from .config import get_settings


def _add_app_context(
    logger: structlog.BoundLogger,
    method_name: str,
    event_dict: Mapping[str, Any],
) -> Mapping[str, Any]:
    """
    Enrich log records with basic app context (name, env).
    """
    settings = get_settings()
    event_dict["app"] = settings.app_name
    event_dict["env"] = settings.env
    return event_dict


def _numpy_to_builtin(
    logger: structlog.BoundLogger,
    method_name: str,
    event_dict: Mapping[str, Any],
) -> Mapping[str, Any]:
    # JSONRenderer rejects np.int64 / np.float32 and arrays
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist() if value.size <= 16 else f"<array {value.shape} {value.dtype}>"
    return event_dict


def setup_logging() -> None:
    """
    Configure structlog + stdlib logging.

    Call this once at process start (the CLI does it before dispatching).
    Logs go to stderr; stdout is reserved for command output tables.
    """
    settings = get_settings()
    level = getattr(logging, settings.log_level.upper(), logging.INFO)

    logging.basicConfig(
        level=level,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )

    renderer: Any
    if settings.log_format == "console":
        renderer = structlog.dev.ConsoleRenderer()
    else:
        renderer = structlog.processors.JSONRenderer()

    processors = [
        structlog.contextvars.merge_contextvars,  # command, seed, ...
        _add_app_context,
        _numpy_to_builtin,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.add_log_level,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        renderer,
    ]

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.make_filtering_bound_logger(level),
        cache_logger_on_first_use=True,
    )
