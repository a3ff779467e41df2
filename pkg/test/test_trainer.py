#!/usr/bin/env pytest
import math
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np
import torch

sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)) + "/../")
sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)))

from common import tiny_config

from ult_locomotion import mixer, utils
from ult_locomotion.errors import ConfigurationError, InternalError, TrainingDivergenceError
from ult_locomotion.trainer import (
    METRIC_COLUMNS,
    TrainConfig,
    UnifiedTrainer,
    derive_seeds,
    lr_schedule,
    train,
)


class TestMixer(unittest.TestCase):
    def test_teacher_fraction(self):
        print("Checking mixer statistics over 4096 agents")
        rng = np.random.default_rng(0)
        for alpha in [0.0, 0.25, 0.6, 1.0]:
            mask = mixer.sample_mask(4096, alpha, rng)
            fraction = mask.mean()
            print("alpha {}: teacher fraction {:.4f}".format(alpha, fraction))
            if alpha in (0.0, 1.0):
                assert fraction == alpha
            else:
                assert abs(fraction - alpha) <= 0.02

    def test_alpha_range(self):
        rng = np.random.default_rng(0)
        with self.assertRaises(ConfigurationError):
            mixer.sample_mask(4, 1.5, rng)
        with self.assertRaises(ConfigurationError):
            mixer.sample_mask(4, -0.1, rng)

    def test_mix_actions(self):
        mask = np.array([True, False, True, False])
        teacher = np.ones((4, 2))
        student = np.zeros((4, 2))
        actions, flags = mixer.mix_actions(mask, teacher, student)
        assert actions[:, 0].tolist() == [1.0, 0.0, 1.0, 0.0]
        assert flags.tolist() == mask.tolist()
        with self.assertRaises(InternalError):
            mixer.mix_actions(mask, np.ones((4, 3)), student)

    def test_resample_period(self):
        state = mixer.MixerState.create(64, 0.5, 3, np.random.default_rng(1))
        masks = [state.tick().copy() for _ in range(3)]
        assert state.steps_since_resample == 3
        assert np.array_equal(masks[0], masks[1]) and np.array_equal(masks[1], masks[2])
        state.tick()
        assert state.steps_since_resample == 1


class TestLearningRate(unittest.TestCase):
    def test_adaptive_rule(self):
        config = TrainConfig()
        assert math.isclose(lr_schedule(1e-3, 0.02, 0, config), 1e-3 / 1.5)
        assert math.isclose(lr_schedule(1e-3, 0.001, 0, config), 1.5e-3)
        assert lr_schedule(1e-3, 0.008, 0, config) == 1e-3

    def test_clamp(self):
        config = TrainConfig()
        with self.assertLogs("ult_locomotion", level="WARNING"):
            assert lr_schedule(9e-3, 0.0, 0, config) == 1e-2
        assert lr_schedule(1e-6, 1.0, 0, config) == 1e-6

    def test_cosine(self):
        config = TrainConfig(
            lr_schedule="cosine", total_updates=100, learning_rate=1e-3, cosine_final_lr=1e-5
        )
        assert math.isclose(lr_schedule(0.0, 0.0, 0, config), 1e-3)
        assert math.isclose(lr_schedule(0.0, 0.0, 100, config), 1e-5)
        assert math.isclose(lr_schedule(0.0, 0.0, 50, config), (1e-3 + 1e-5) / 2)

    def test_derive_seeds(self):
        seeds = derive_seeds(1, 5)
        assert len(seeds) == 5 and len(set(seeds)) == 5
        assert seeds == derive_seeds(1, 5)
        assert seeds != derive_seeds(2, 5)


class NaNTrainer(UnifiedTrainer):
    def extra_loss(self, outputs, minibatch):
        return torch.tensor(float("nan"))


class TestTraining(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_outputs(self):
        cfg = tiny_config()
        trainer, final = train(cfg, self.tmp)
        assert final == os.path.join(self.tmp, "final.ultc")
        for name in ["final.ultc", "metrics.csv", "summary.json", "config.json"]:
            assert os.path.isfile(os.path.join(self.tmp, name)), name
        for update in [1, 2]:
            assert os.path.isfile(
                os.path.join(self.tmp, "checkpoints", "update_{:05d}.ultc".format(update))
            )
        rows = utils.read_csv(os.path.join(self.tmp, "metrics.csv"))
        assert len(rows) == 2
        assert list(rows[0].keys()) == METRIC_COLUMNS
        assert [int(r["update"]) for r in rows] == [1, 2]
        assert int(rows[-1]["env_steps"]) == 2 * 4 * 8
        assert trainer.env_steps == 64
        for row in rows:
            for column in ["L_n", "L_a", "L_RL", "lr", "mean_reward"]:
                assert math.isfinite(float(row[column])), column

    def test_teacher_fraction_extremes(self):
        for alpha, expected in [(0.0, 0.0), (1.0, 1.0)]:
            out_dir = os.path.join(self.tmp, "alpha_{}".format(alpha))
            train(tiny_config({"mixer": {"alpha": alpha}}), out_dir)
            rows = utils.read_csv(os.path.join(out_dir, "metrics.csv"))
            assert all(float(r["teacher_fraction"]) == expected for r in rows)

    def test_resume_is_deterministic(self):
        print("Comparing an uninterrupted run with a resumed one")
        cfg = tiny_config({"train": {"total_updates": 4, "checkpoint_interval": 2}})
        full_dir = os.path.join(self.tmp, "full")
        resumed_dir = os.path.join(self.tmp, "resumed")
        full, _ = train(cfg, full_dir)
        resumed, _ = train(
            cfg,
            resumed_dir,
            resume=os.path.join(full_dir, "checkpoints", "update_00002.ultc"),
        )
        assert resumed.update == 4
        full_state = full.model.state_dict()
        resumed_state = resumed.model.state_dict()
        for name in full_state:
            assert torch.equal(full_state[name], resumed_state[name]), name
        full_rows = utils.read_csv(os.path.join(full_dir, "metrics.csv"))[2:]
        resumed_rows = utils.read_csv(os.path.join(resumed_dir, "metrics.csv"))
        assert full_rows == resumed_rows
        assert np.array_equal(full.window.tokens, resumed.window.tokens)

    def test_identical_runs(self):
        cfg = tiny_config()
        train(cfg, os.path.join(self.tmp, "a"))
        train(cfg, os.path.join(self.tmp, "b"))
        with open(os.path.join(self.tmp, "a", "metrics.csv")) as a_f:
            first = a_f.read()
        with open(os.path.join(self.tmp, "b", "metrics.csv")) as b_f:
            second = b_f.read()
        assert first == second

    def test_incidents(self):
        print("Testing recovery from non-finite losses")
        cfg = tiny_config()
        trainer = NaNTrainer(cfg, None)
        before = {k: v.clone() for k, v in trainer.model.state_dict().items()}
        initial_lr = trainer.lr
        with self.assertLogs("ult_locomotion", level="WARNING"):
            row = trainer.run_update()
        assert math.isnan(row["L_RL"])
        assert trainer.incidents == 1
        assert math.isclose(trainer.lr, initial_lr / 2)
        for name, value in trainer.model.state_dict().items():
            assert torch.equal(value, before[name]), name

        trainer.run_update()
        assert trainer.incidents == 2
        with self.assertRaises(TrainingDivergenceError):
            trainer.run_update()

    def test_incident_halving_survives_cosine(self):
        cfg = tiny_config({"train": {"lr_schedule": "cosine"}})
        trainer = NaNTrainer(cfg, None)
        tc = trainer.train_config
        with self.assertLogs("ult_locomotion", level="WARNING"):
            trainer.run_update()
        assert trainer.lr_scale == 0.5
        assert math.isclose(trainer.lr, lr_schedule(0.0, 0.0, 0, tc) / 2)

        with self.assertLogs("ult_locomotion", level="WARNING"):
            row = trainer.run_update()
        assert trainer.lr_scale == 0.25
        assert math.isclose(row["lr"], lr_schedule(0.0, 0.0, 1, tc) / 4)


if __name__ == "__main__":
    unittest.main()
