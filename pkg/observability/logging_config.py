"""Logging configuration module.

This module provides a unified logging setup for the ice emulator with:
- Console logging to stderr
- Rotating file logging to <log_dir>/ice_emulator.log
- Consistent formatting with timestamps, log levels, and logger names
- Simple get_logger() helper function for easy logger creation

Level and directory come from config.settings (ICE_EMU_LOG_LEVEL,
ICE_EMU_LOG_DIR).
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from config.settings import get_settings


LOG_FILE_NAME = "ice_emulator.log"

# Log format
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Track if handlers have been configured
_handlers_configured = False


def _setup_handlers(level: Optional[str] = None):
    """
    Configure logging handlers (console and rotating file).

    Handlers are added only once. The file handler is skipped when the
    settings carry no log directory.
    """
    global _handlers_configured

    if _handlers_configured:
        return

    settings = get_settings()
    log_level = logging.getLevelName(level or settings.log_level)
    if not isinstance(log_level, int):
        log_level = logging.INFO

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if settings.log_dir:
        log_dir = Path(settings.log_dir)
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_dir / LOG_FILE_NAME,
            maxBytes=1024 * 1024,  # 1 MB
            backupCount=3,
            encoding="utf-8"
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    _handlers_configured = True


def set_level(level: str) -> None:
    """Change the level of the root logger and its handlers at runtime."""
    _setup_handlers()
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")
    root_logger = logging.getLogger()
    root_logger.setLevel(numeric)
    for handler in root_logger.handlers:
        handler.setLevel(numeric)


def get_logger(name: str = "ice-emulator") -> logging.Logger:
    """
    Return a configured logger with the given name.

    Args:
        name: Logger name (typically the module's ``__name__``).

    Returns:
        Logger instance propagating to the shared console/file handlers

    Example:
        >>> logger = get_logger("icesim.transient")
        >>> logger.info("Scenario sigma_max=0.75MPa finished")
    """
    _setup_handlers()
    return logging.getLogger(name)
