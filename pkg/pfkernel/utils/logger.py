"""
Logging utility
Package-wide logging setup
"""
import logging
import sys

from pfkernel.utils.settings import get_settings


def setup_logger(name: str = __name__, level: int | None = None) -> logging.Logger:
    """
    Configure and return a logger.

    Records go to stderr so that command-line output on stdout stays machine readable.

    Args:
        name: logger name
        level: logging level (defaults to PF_LOG_LEVEL)

    Returns:
        the configured Logger
    """
    if level is None:
        level = logging.getLevelName(get_settings().log_level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    logger = logging.getLogger(name)
    logger.setLevel(level)

    # avoid duplicate handlers
    if logger.handlers:
        return logger

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)

    formatter = logging.Formatter(
        '%(asctime)s | %(name)s | %(levelname)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(formatter)

    logger.addHandler(console_handler)

    return logger
