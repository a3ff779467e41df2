#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Console logging shared by every module: one cached logger per name,
level names colored with ANSI escapes.
"""

import logging
from typing import Dict

LOG_FORMAT = "%(levelname)s - %(module)s - %(message)s"

LEVEL_COLORS = {
    logging.CRITICAL: "\033[1;31m",  # red
    logging.ERROR: "\033[1;31m",  # red
    logging.WARNING: "\033[1;33m",  # yellow
    logging.INFO: "\033[1;34m",  # blue
    logging.DEBUG: "\033[1;35m",  # magenta
}
RESET = "\033[1;0m"

loggers: Dict[str, logging.Logger] = {}


class ColorFormatter(logging.Formatter):
    """
    Colors the level name of each record without touching the global
    level name table
    """

    def format(self, record):
        color = LEVEL_COLORS.get(record.levelno)
        if color is None:
            return super().format(record)
        plain = record.levelname
        record.levelname = color + plain + RESET
        try:
            return super().format(record)
        finally:
            record.levelname = plain


def setup_custom_logger(name, debug=False):
    """
    Return the logger for `name`, creating it with a colored stream handler
    on first use. debug=True switches it to DEBUG.
    """
    logger = loggers.get(name)
    if logger is None:
        handler = logging.StreamHandler()
        handler.setFormatter(ColorFormatter(fmt=LOG_FORMAT))

        logger = logging.getLogger(name)
        logger.handlers.clear()
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        logger.propagate = False
        loggers[name] = logger

    if debug:
        logger.setLevel(logging.DEBUG)
    return logger


def set_verbosity(name, debug=False, quiet=False):
    """
    Level from the command-line flags; quiet wins over debug
    """
    logger = setup_custom_logger(name)
    if quiet:
        level = logging.CRITICAL
    elif debug:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logger.setLevel(level)
    return logger
