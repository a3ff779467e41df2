#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Action mixer: per-agent selection between teacher and student actions.
"""

from dataclasses import dataclass

import numpy as np

from . import log
from .errors import ConfigurationError, InternalError

logger = log.setup_custom_logger("ult_locomotion")


def sample_mask(num_agents, alpha, rng):
    """
    Teacher flag per agent: True iff a uniform draw falls below alpha.

    Arguments:
        num_agents {int} -- X
        alpha {float} -- mix ratio in [0, 1]
        rng {np.random.Generator} -- mixer generator

    Returns:
        np.ndarray -- boolean mask, length X
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("mix ratio alpha must lie in [0, 1], got {}".format(alpha))
    return rng.uniform(0.0, 1.0, size=num_agents) < alpha


def mix_actions(mask, teacher_actions, student_actions):
    """
    Select teacher rows where mask is set, student rows elsewhere.

    Returns:
        tuple -- (executed actions, provenance flags)
    """
    mask = np.asarray(mask, dtype=bool)
    teacher_actions = np.asarray(teacher_actions)
    student_actions = np.asarray(student_actions)
    if teacher_actions.shape != student_actions.shape or len(mask) != len(student_actions):
        raise InternalError(
            "Mixer shapes disagree: mask {}, teacher {}, student {}".format(
                mask.shape, teacher_actions.shape, student_actions.shape
            )
        )
    actions = np.where(mask[:, None], teacher_actions, student_actions)
    return actions, mask.copy()


@dataclass
class MixerState:
    alpha: float
    mask: np.ndarray
    resample_period: int
    rng: np.random.Generator
    steps_since_resample: int = 0

    @classmethod
    def create(cls, num_agents, alpha, resample_period, rng):
        state = cls(
            alpha=alpha,
            mask=np.zeros(num_agents, dtype=bool),
            resample_period=resample_period,
            rng=rng,
        )
        state.resample()
        return state

    def resample(self):
        self.mask = sample_mask(len(self.mask), self.alpha, self.rng)
        self.steps_since_resample = 0
        logger.debug("Mixer mask resampled: teacher fraction {:.3f}".format(self.mask.mean()))

    def tick(self):
        """
        Advance one control step, resampling once the period has elapsed
        """
        if self.steps_since_resample >= self.resample_period:
            self.resample()
        self.steps_since_resample += 1
        return self.mask

    @property
    def teacher_fraction(self):
        return float(self.mask.mean()) if len(self.mask) else 0.0


if __name__ == "__main__":
    print("this is only a module")
