#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Locomotion reward terms.
"""

import numpy as np

from .errors import ConfigurationError

REWARD_TERMS = [
    "lin_vel_tracking",
    "ang_vel_tracking",
    "body_z_velocity",
    "body_rotation",
    "joint_acceleration",
    "output_work",
    "action_rate",
    "feet_slip",
    "collision",
]


def reward_terms(inputs, sharpness=5.0):
    """
    Unweighted reward terms, one (N,) array per name in REWARD_TERMS.

    Arguments:
        inputs {RewardInputs} -- quantities of one control step
        sharpness {float} -- exponent scale of both tracking kernels

    Returns:
        dict -- term name -> per-agent value
    """
    lin_error = np.sum(np.square(inputs.lin_vel_cmd - inputs.lin_vel), axis=1)
    ang_error = np.square(inputs.ang_vel_cmd - inputs.ang_vel)
    slip_speed = np.linalg.norm(inputs.foot_velocity, axis=2)
    return {
        "lin_vel_tracking": np.exp(-sharpness * lin_error),
        "ang_vel_tracking": np.exp(-sharpness * ang_error),
        "body_z_velocity": np.square(inputs.vertical_vel),
        "body_rotation": np.square(inputs.ang_vel),
        "joint_acceleration": np.sum(np.square(inputs.joint_acc), axis=1),
        "output_work": np.asarray(inputs.work, dtype=float),
        "action_rate": np.sum(np.square(inputs.action - inputs.prev_action), axis=1),
        "feet_slip": np.sum(inputs.foot_contacts * slip_speed, axis=1),
        "collision": np.asarray(inputs.collision, dtype=float),
    }


def compute_reward(inputs, scales, sharpness=5.0):
    """
    Weighted sum of the nine reward terms.

    Arguments:
        inputs {RewardInputs} -- quantities of one control step
        scales {dict} -- term name -> weight
        sharpness {float} -- tracking kernel sharpness

    Returns:
        tuple -- (total (N,), unweighted terms, weighted terms)
    """
    missing = [name for name in REWARD_TERMS if name not in scales]
    if missing:
        raise ConfigurationError("Missing reward scales: {}".format(missing))
    raw = reward_terms(inputs, sharpness)
    weighted = {name: scales[name] * raw[name] for name in REWARD_TERMS}
    total = np.zeros_like(raw["lin_vel_tracking"])
    for name in REWARD_TERMS:
        total = total + weighted[name]
    return total, raw, weighted


if __name__ == "__main__":
    print("this is only a module")
