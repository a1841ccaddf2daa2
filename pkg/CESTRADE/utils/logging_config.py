"""
Logging configuration for the CESTRADE simulator.

Console output goes to stderr so that stdout stays free for command results.
Each run may also write a log file named after the subcommand that produced it.
"""

import datetime
import logging
import os
import sys
from typing import Dict, Optional

# Global logger instances cache
_loggers: Dict[str, logging.Logger] = {}

DEBUG_ENV_VAR = "CESTRADE_DEBUG"
LOG_DIR_ENV_VAR = "CESTRADE_LOG_DIR"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def default_log_dir(app_name: str = "CESTRADE") -> str:
    """
    Directory for log files.

    CESTRADE_LOG_DIR wins; otherwise %APPDATA%/<app>/logs on Windows and
    ~/.<app>/logs elsewhere.
    """
    override = os.environ.get(LOG_DIR_ENV_VAR)
    if override:
        return override
    if sys.platform == "win32":
        return os.path.join(os.environ.get("APPDATA", "."), app_name, "logs")
    return os.path.join(os.path.expanduser("~"), f".{app_name.lower()}", "logs")


def log_file_name(
    app_name: str, run_tag: Optional[str] = None, now: Optional[datetime.datetime] = None
) -> str:
    """
    Name of a run's log file.

    Args:
        app_name: Application name
        run_tag: Subcommand or study name, if any
        now: Timestamp to use; defaults to the current time

    Returns:
        File name such as "cestrade_sweep_2024-05-01_12-00-00.log"
    """
    stamp = (now or datetime.datetime.now()).strftime("%Y-%m-%d_%H-%M-%S")
    parts = [app_name.lower()]
    if run_tag:
        parts.append(run_tag)
    parts.append(stamp)
    return "_".join(parts) + ".log"


def initialize_logging(
    app_name: str = "CESTRADE",
    log_level: int = logging.INFO,
    log_to_file: bool = True,
    log_dir: Optional[str] = None,
    run_tag: Optional[str] = None,
) -> logging.Logger:
    """
    Initialize logging for a command-line run.

    Replaces the root handlers with a stderr console handler and, optionally,
    a file handler. Python warnings (numpy overflow and the like) are routed
    into the log.

    Args:
        app_name: Application name for the log directory and file
        log_level: Default logging level
        log_to_file: Whether to also write a log file
        log_dir: Directory for the log file; defaults to default_log_dir()
        run_tag: Tag added to the log file name

    Returns:
        Root logger instance
    """
    root_logger = logging.getLogger()

    # Clear any existing handlers to avoid duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    if os.environ.get(DEBUG_ENV_VAR, "").lower() in ("1", "true", "yes"):
        log_level = logging.DEBUG
    root_logger.setLevel(log_level)

    formatter = logging.Formatter(LOG_FORMAT)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    logging.captureWarnings(True)

    if log_to_file:
        directory = log_dir or default_log_dir(app_name)
        try:
            os.makedirs(directory, exist_ok=True)
            log_file = os.path.join(directory, log_file_name(app_name, run_tag))
            file_handler = logging.FileHandler(log_file, encoding="utf-8")
            file_handler.setLevel(log_level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)
            root_logger.debug(f"Log file: {log_file}")
        except OSError as e:
            root_logger.warning(f"File logging unavailable ({e}); console only")

    _loggers["root"] = root_logger
    return root_logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger with the specified name.

    Args:
        name: Logger name, "cestrade.<module>" by convention

    Returns:
        Logger instance
    """
    if name not in _loggers:
        _loggers[name] = logging.getLogger(name)
    return _loggers[name]


def enable_debug_mode() -> None:
    """Lower the root logger and its handlers to DEBUG."""
    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    for handler in root_logger.handlers:
        handler.setLevel(logging.DEBUG)
    root_logger.debug("Debug logging enabled")


def get_log_file_path() -> Optional[str]:
    """Path of the active log file, or None when logging to the console only."""
    for handler in logging.getLogger().handlers:
        if isinstance(handler, logging.FileHandler):
            return handler.baseFilename
    return None
