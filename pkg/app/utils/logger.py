"""
Colorful logging configuration
"""

import logging
import sys
from typing import IO, Optional

from app.config import settings


def _build_formatter() -> logging.Formatter:
    if settings.log_format == "colorlog":
        try:
            from colorlog import ColoredFormatter

            return ColoredFormatter(
                "%(log_color)s%(levelname)-8s%(reset)s %(blue)s%(message)s",
                datefmt=None,
                reset=True,
                log_colors={
                    'DEBUG': 'cyan',
                    'INFO': 'green',
                    'WARNING': 'yellow',
                    'ERROR': 'red',
                    'CRITICAL': 'red,bg_white',
                },
                style='%'
            )
        except ImportError:
            return logging.Formatter('%(levelname)-8s %(message)s')
    return logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')


def setup_logger(name: str = "stieltjes", stream: Optional[IO[str]] = None) -> logging.Logger:
    """Setup logger with colored output"""

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, settings.log_level.upper()))

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    handler = logging.StreamHandler(stream or sys.stdout)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(_build_formatter())
    logger.addHandler(handler)
    logger.propagate = False

    return logger


def redirect_logger(stream: IO[str], level: str) -> None:
    """Point the global logger at another stream (the CLI keeps stdout for reports)"""
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(stream)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(_build_formatter())
    logger.addHandler(handler)
    logger.setLevel(getattr(logging, level.upper()))


# Global logger instance
logger = setup_logger()
