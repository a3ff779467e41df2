#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.
"""

from . import log

logger = log.setup_custom_logger("ult_locomotion")


class ULTError(Exception):
    def __init__(self, message):
        logger.error(message)
        super().__init__(message)


class ConfigurationError(ULTError):
    """
    Invalid configuration: inverted ranges, dimension mismatches, unknown keys.
    """


class UsageError(ULTError):
    """
    A call that the contract forbids, e.g. privilege input in deploy mode.
    """


class CheckpointError(ULTError):
    pass


class ReportError(ULTError):
    pass


class InternalError(ULTError):
    """
    Broken internal contract (misaligned sequences, missing provenance flags).
    """


class TrainingDivergenceError(ULTError):
    pass
