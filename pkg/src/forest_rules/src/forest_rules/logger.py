"""Centralized logging configuration for forest-rules."""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

PACKAGE_LOGGER_NAME = "forest_rules"
LOG_FILE_NAME = "forest-rules.log"


def setup_logging(log_level: int = logging.INFO, log_dir: Path | None = None) -> None:
    """Set up logging configuration.

    Records go to stderr so that stdout stays free for command summaries. When
    ``log_dir`` is given, a rotating log file is written there as well.

    Args:
        log_level: Level for the root logger
        log_dir: Optional directory for the rotating log file
    """
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(
            RotatingFileHandler(
                log_dir / LOG_FILE_NAME,
                mode="a",
                encoding="utf-8",
                maxBytes=50 * 1024,  # 50KB
                backupCount=5,
            )
        )

    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def get_log_dir_path(log_dir: str | None) -> Path | None:
    """Resolve the configured log directory.

    Returns:
        Path to the logs directory, or None when file logging is off
    """
    if not log_dir:
        return None
    return Path(log_dir).expanduser()


def get_logger(name: str | None = None) -> logging.Logger:
    """Get the package logger or one of its children.

    Args:
        name: Dotted module name; names outside the package become children of it

    Returns:
        The logger instance
    """
    if name is None or name == PACKAGE_LOGGER_NAME:
        return logging.getLogger(PACKAGE_LOGGER_NAME)
    if name.startswith(PACKAGE_LOGGER_NAME + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER_NAME}.{name}")
