"""Logging setup shared by the command-line entry points."""

from __future__ import annotations

import logging
import os

from .config import DEFAULT_LOG_LEVEL, LOG_ENV_VAR

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = {
    "error": logging.ERROR,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def resolve_log_level(value: str | None = None) -> int:
    """Map a level name (or the environment variable) onto a :mod:`logging` level."""

    name = (value or os.environ.get(LOG_ENV_VAR) or DEFAULT_LOG_LEVEL).strip().lower()
    try:
        return LOG_LEVELS[name]
    except KeyError as exc:
        choices = ", ".join(LOG_LEVELS)
        raise ValueError(f"Unknown log level {name!r}; expected one of {choices}") from exc


def configure_logging(value: str | None = None) -> None:
    """Attach a single stderr handler to the ``bayescfr`` logger."""

    logger = logging.getLogger("bayescfr")
    logger.setLevel(resolve_log_level(value))
    if not any(getattr(handler, "_bayescfr", False) for handler in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._bayescfr = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
