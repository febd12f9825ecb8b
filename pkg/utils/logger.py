"""
Logging utilities for the manipulator pipeline.

Console output is coloured with colorlog when it is installed; file logging is
optional and off by default.
"""
import os
import sys
import logging
from typing import Optional, Dict, Any
from datetime import datetime

try:
    import colorlog
except ImportError:  # pragma: no cover
    colorlog = None


DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
COLOR_FORMAT = "%(log_color)s%(asctime)s - %(name)s - %(levelname)s%(reset)s - %(message)s"
LOG_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "bold_red",
}


def _console_formatter(log_format: Optional[str]) -> logging.Formatter:
    if colorlog is not None and log_format is None and sys.stdout.isatty():
        return colorlog.ColoredFormatter(COLOR_FORMAT, log_colors=LOG_COLORS)
    return logging.Formatter(log_format or DEFAULT_FORMAT)


def setup_logger(
    name: str,
    log_file: Optional[str] = None,
    level: int = logging.INFO,
    log_format: Optional[str] = None,
    log_to_console: bool = True,
    log_to_file: bool = False,
    rotation: bool = False,
    max_bytes: int = 10485760,  # 10MB
    backup_count: int = 5
) -> logging.Logger:
    """
    Set up a logger with console and file handlers.

    Args:
        name: Logger name ("" for the root logger)
        log_file: Path to log file (if None, logs/<name>_<date>.log)
        level: Logging level
        log_format: Log format string; the coloured format is used on a terminal if None
        log_to_console: Whether to log to console
        log_to_file: Whether to log to file
        rotation: Whether to use rotating file handler
        max_bytes: Maximum bytes for rotating file handler
        backup_count: Number of backup files for rotating file handler

    Returns:
        Configured logger
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if logger.handlers:
        logger.handlers.clear()

    if log_to_console:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(_console_formatter(log_format))
        logger.addHandler(console_handler)

    if log_to_file:
        if not log_file:
            log_dir = os.path.join(os.getcwd(), "logs")
            os.makedirs(log_dir, exist_ok=True)
            date_str = datetime.now().strftime("%Y%m%d")
            log_file = os.path.join(log_dir, f"{name or 'manipulator'}_{date_str}.log")

        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

        if rotation:
            from logging.handlers import RotatingFileHandler
            file_handler: logging.Handler = RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=backup_count
            )
        else:
            file_handler = logging.FileHandler(log_file)

        file_handler.setFormatter(logging.Formatter(log_format or DEFAULT_FORMAT))
        logger.addHandler(file_handler)

    return logger


def get_logger(
    name: str,
    config: Optional[Dict[str, Any]] = None
) -> logging.Logger:
    """
    Get a logger configured from the `logging` config section.

    Recognized keys: level, file, format, to_console, to_file, rotation,
    max_bytes, backup_count.

    Args:
        name: Logger name
        config: Logging section as a dictionary

    Returns:
        Configured logger
    """
    if config is None:
        config = {}

    level_name = str(config.get("level", "INFO")).upper()
    level = getattr(logging, level_name, logging.INFO)

    return setup_logger(
        name=name,
        log_file=config.get("file"),
        level=level,
        log_format=config.get("format"),
        log_to_console=config.get("to_console", True),
        log_to_file=config.get("to_file", False),
        rotation=config.get("rotation", False),
        max_bytes=config.get("max_bytes", 10485760),
        backup_count=config.get("backup_count", 5)
    )


class LoggerAdapter(logging.LoggerAdapter):
    """
    Logger adapter that prefixes messages with [key=value ...] context.
    """

    def __init__(self, logger: logging.Logger, extra: Optional[Dict[str, Any]] = None):
        if extra is None:
            extra = {}
        super().__init__(logger, extra)

    def process(self, msg: str, kwargs: Dict[str, Any]) -> tuple:
        context_items = [
            f"{key}={value}" for key, value in (self.extra or {}).items() if value is not None
        ]
        if context_items:
            msg = f"[{' '.join(context_items)}] {msg}"
        return msg, kwargs


def get_logger_with_context(
    name: str,
    context: Optional[Dict[str, Any]] = None,
    config: Optional[Dict[str, Any]] = None
) -> LoggerAdapter:
    """
    Get a logger adapter with context.

    Without a config the named logger is used as is, so library code does
    not reconfigure handlers set up by the entry point.

    Args:
        name: Logger name
        context: Context dictionary
        config: Logging section; if given the logger is configured from it

    Returns:
        Logger adapter with context
    """
    logger = get_logger(name, config) if config is not None else logging.getLogger(name)
    return LoggerAdapter(logger, context)
