#!/usr/bin/env pytest
import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)) + "/../")

from ult_locomotion import reward
from ult_locomotion.config import DEFAULTS
from ult_locomotion.dynamics import RewardInputs
from ult_locomotion.errors import ConfigurationError

SCALES = DEFAULTS["env"]["reward_scales"]


def random_inputs(rng, count=1000, joints=4, feet=2):
    return RewardInputs(
        lin_vel_cmd=rng.uniform(-0.5, 0.5, (count, 2)),
        lin_vel=rng.uniform(-1.0, 1.0, (count, 2)),
        ang_vel_cmd=rng.uniform(-0.5, 0.5, count),
        ang_vel=rng.uniform(-1.0, 1.0, count),
        vertical_vel=rng.normal(size=count),
        joint_acc=rng.normal(scale=100.0, size=(count, joints)),
        work=rng.uniform(0.0, 10.0, count),
        action=rng.normal(size=(count, joints)),
        prev_action=rng.normal(size=(count, joints)),
        foot_contacts=(rng.uniform(size=(count, feet)) > 0.5).astype(float),
        foot_velocity=rng.normal(size=(count, feet, 2)),
        collision=rng.uniform(size=count) > 0.9,
    )


def still_inputs(count=1, joints=4, feet=2):
    return RewardInputs(
        lin_vel_cmd=np.zeros((count, 2)),
        lin_vel=np.zeros((count, 2)),
        ang_vel_cmd=np.zeros(count),
        ang_vel=np.zeros(count),
        vertical_vel=np.zeros(count),
        joint_acc=np.zeros((count, joints)),
        work=np.zeros(count),
        action=np.zeros((count, joints)),
        prev_action=np.zeros((count, joints)),
        foot_contacts=np.zeros((count, feet)),
        foot_velocity=np.zeros((count, feet, 2)),
        collision=np.zeros(count, dtype=bool),
    )


def formula(inputs, i, sharpness=5.0):
    """
    Term values of agent i, one scalar expression per term
    """
    dvx = inputs.lin_vel_cmd[i][0] - inputs.lin_vel[i][0]
    dvy = inputs.lin_vel_cmd[i][1] - inputs.lin_vel[i][1]
    slip = 0.0
    for foot in range(inputs.foot_contacts.shape[1]):
        vx, vy = inputs.foot_velocity[i][foot]
        slip += inputs.foot_contacts[i][foot] * math.sqrt(vx * vx + vy * vy)
    return {
        "lin_vel_tracking": math.exp(-sharpness * (dvx * dvx + dvy * dvy)),
        "ang_vel_tracking": math.exp(
            -sharpness * (inputs.ang_vel_cmd[i] - inputs.ang_vel[i]) ** 2
        ),
        "body_z_velocity": inputs.vertical_vel[i] ** 2,
        "body_rotation": inputs.ang_vel[i] ** 2,
        "joint_acceleration": sum(a * a for a in inputs.joint_acc[i]),
        "output_work": inputs.work[i],
        "action_rate": sum(
            (a - b) ** 2 for a, b in zip(inputs.action[i], inputs.prev_action[i])
        ),
        "feet_slip": slip,
        "collision": 1.0 if inputs.collision[i] else 0.0,
    }


class TestReward(unittest.TestCase):
    def test_tracking_anchor(self):
        print("Testing the tracking kernel anchor value")
        inputs = still_inputs()
        inputs.lin_vel_cmd[0] = [0.5, 0.0]
        _, raw, _ = reward.compute_reward(inputs, SCALES)
        print("lin_vel_tracking = {}".format(raw["lin_vel_tracking"][0]))
        assert abs(raw["lin_vel_tracking"][0] - math.exp(-1.25)) < 1e-12
        assert abs(raw["lin_vel_tracking"][0] - 0.2865) < 1e-4

    def test_collision_scale(self):
        inputs = still_inputs(2)
        inputs.collision[1] = True
        _, raw, weighted = reward.compute_reward(inputs, SCALES)
        assert raw["collision"].tolist() == [0.0, 1.0]
        assert weighted["collision"].tolist() == [0.0, -1.0]

    def test_perfect_tracking(self):
        inputs = still_inputs(3)
        inputs.lin_vel_cmd[:] = [0.3, -0.2]
        inputs.lin_vel[:] = [0.3, -0.2]
        inputs.ang_vel_cmd[:] = 0.25
        inputs.ang_vel[:] = 0.25
        _, raw, _ = reward.compute_reward(inputs, SCALES)
        assert np.all(raw["lin_vel_tracking"] == 1.0)
        assert np.all(raw["ang_vel_tracking"] == 1.0)

    def test_formula_conformance(self):
        print("Checking every term against scalar formulas on 1000 random inputs")
        rng = np.random.default_rng(3)
        inputs = random_inputs(rng)
        total, raw, weighted = reward.compute_reward(inputs, SCALES)
        assert sorted(raw) == sorted(reward.REWARD_TERMS)
        worst = 0.0
        for i in range(len(total)):
            expected = formula(inputs, i)
            expected_total = 0.0
            for name in reward.REWARD_TERMS:
                value = expected[name]
                error = abs(raw[name][i] - value) / max(abs(value), 1.0)
                worst = max(worst, error)
                expected_total += SCALES[name] * value
            assert abs(total[i] - expected_total) <= 1e-12 * max(abs(expected_total), 1.0)
        print("worst relative error: {}".format(worst))
        assert worst <= 1e-12

    def test_total_is_weighted_sum(self):
        rng = np.random.default_rng(11)
        inputs = random_inputs(rng, count=50)
        total, raw, weighted = reward.compute_reward(inputs, SCALES)
        for name in reward.REWARD_TERMS:
            assert np.allclose(weighted[name], SCALES[name] * raw[name], rtol=0, atol=0)
        assert np.allclose(total, sum(weighted[name] for name in reward.REWARD_TERMS))

    def test_sharpness(self):
        inputs = still_inputs()
        inputs.ang_vel_cmd[0] = 0.5
        _, raw, _ = reward.compute_reward(inputs, SCALES, sharpness=2.0)
        assert abs(raw["ang_vel_tracking"][0] - math.exp(-0.5)) < 1e-12

    def test_missing_scale(self):
        scales = dict(SCALES)
        del scales["feet_slip"]
        with self.assertRaises(ConfigurationError):
            reward.compute_reward(still_inputs(), scales)


if __name__ == "__main__":
    unittest.main()
