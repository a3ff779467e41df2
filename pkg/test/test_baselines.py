#!/usr/bin/env pytest
import copy
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

from ult_locomotion import baselines, evaluation, terrain, utils
from ult_locomotion.baselines import (
    SOURCE_STUDENT,
    SOURCE_TEACHER,
    DistillDataset,
    Distiller,
    JointTrainer,
    joint_weight,
)
from ult_locomotion.errors import UsageError
from ult_locomotion.network import NetConfig, ULTNet
from ult_locomotion.trainer import train


class TestJointWeight(unittest.TestCase):
    def test_schedule(self):
        assert joint_weight(0, 10) == 1.0
        assert joint_weight(2.5, 10) == 0.5
        assert joint_weight(5, 10) == 0.0
        assert joint_weight(8, 10) == 0.0
        assert joint_weight(0, 10, initial_weight=2.0) == 2.0
        assert joint_weight(0, 0) == 0.0


class TestDistillDataset(unittest.TestCase):
    def make(self, capacity=4):
        return DistillDataset(capacity, window=3, token_dim=5, action_dim=2, privilege_dim=4)

    def rows(self, count, offset=0):
        tokens = np.zeros((count, 3, 5))
        lengths = np.ones(count, dtype=np.int64)
        privilege = np.zeros((count, 4))
        labels = np.arange(offset, offset + count, dtype=float)[:, None].repeat(2, axis=1)
        return tokens, lengths, privilege, labels

    def test_ring(self):
        data = self.make()
        data.add(*self.rows(3), SOURCE_TEACHER)
        assert len(data) == 3
        data.add(*self.rows(1, 3), SOURCE_STUDENT)
        assert len(data) == 4
        assert data.source_fraction(SOURCE_TEACHER) == 0.75
        data.add(*self.rows(1, 4), SOURCE_STUDENT)
        assert len(data) == 4
        assert data.source_fraction(SOURCE_STUDENT) == 0.5
        assert sorted(data.labels[:, 0].tolist()) == [1.0, 2.0, 3.0, 4.0]

    def test_oversized_add(self):
        data = self.make()
        data.add(*self.rows(6), SOURCE_TEACHER)
        assert len(data) == 4
        assert sorted(data.labels[:, 0].tolist()) == [2.0, 3.0, 4.0, 5.0]

    def test_empty(self):
        data = self.make()
        assert data.source_fraction(SOURCE_STUDENT) == 0.0
        assert list(data.batches(2, np.random.default_rng(0))) == []


class TestDistillation(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.cfg = tiny_config()
        torch.manual_seed(0)
        self.oracle = baselines.build_oracle(self.cfg)

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def student(self):
        torch.manual_seed(1)
        return baselines.build_student(self.cfg)

    def test_student_has_no_privileged_path(self):
        student = self.student()
        assert student.kind == "ult-deploy"
        assert student.teacher_head is None
        assert not student.config.use_teacher

    def test_zero_budget(self):
        student = self.student()
        before = copy.deepcopy(student.state_dict())
        distiller = baselines.distill_offline(self.oracle, student, self.cfg, budget=0)
        assert distiller.env_steps == 0
        for name, value in student.state_dict().items():
            assert torch.equal(value, before[name]), name

    def test_labels_are_oracle_means(self):
        distiller = Distiller(self.cfg, self.student(), self.oracle)
        distiller.collect(16, "teacher")
        data = distiller.dataset
        assert len(data) == 16
        assert data.source_fraction(SOURCE_TEACHER) == 1.0
        with torch.no_grad():
            expected = self.oracle.evaluate(
                data.tokens[:16], data.lengths[:16], data.privilege[:16]
            ).teacher_mean.double().numpy()
        assert np.allclose(data.labels[:16], expected, atol=1e-6)

    def test_online_provenance(self):
        print("Online distillation: every stored window comes from the student")
        distiller = baselines.distill_online(self.oracle, self.student(), self.cfg, budget=32)
        assert distiller.env_steps == 32
        assert distiller.dataset.source_fraction(SOURCE_STUDENT) == 1.0
        assert len(distiller.action_gaps) == 1
        assert distiller.action_gaps[0] >= 0.0

    def test_fit_reduces_loss(self):
        distiller = Distiller(self.cfg, self.student(), self.oracle)
        distiller.collect(64, "teacher")
        losses = distiller.fit(10)
        print("distillation losses: {}".format(", ".join("{:.5f}".format(l) for l in losses)))
        assert len(losses) == 10
        assert losses[-1] < losses[0]

    def test_two_stage_without_online_budget(self):
        offline = baselines.distill_offline(self.oracle, self.student(), self.cfg, budget=32)
        out_dir = os.path.join(self.tmp, "two-stage")
        two_stage = baselines.distill_two_stage(
            self.oracle, self.student(), self.cfg, budgets=(32, 0), out_dir=out_dir
        )
        assert two_stage.env_steps == offline.env_steps == 32
        offline_state = offline.student.state_dict()
        for name, value in two_stage.student.state_dict().items():
            assert torch.equal(value, offline_state[name]), name
        schemes = [r["scheme"] for r in utils.read_csv(os.path.join(out_dir, "metrics.csv"))]
        assert schemes == ["two-stage:offline", "two-stage", "two-stage:online"]


class TestPostHoc(unittest.TestCase):
    def setUp(self):
        self.cfg = tiny_config({"mixer": {"alpha": 1.0}})
        torch.manual_seed(0)
        self.model = ULTNet(NetConfig.from_dict(self.cfg["net"]))

    def test_only_student_changes(self):
        print("Post-hoc transfer keeps the teacher path frozen")
        reference = copy.deepcopy(self.model)
        teacher_before = [p.detach().clone() for p in self.model.teacher_parameters()]
        student_before = [p.detach().clone() for p in self.model.student_parameters()]
        distiller, before, after = baselines.post_hoc_transfer(
            self.model, self.cfg, budget=32, episodes=10
        )
        assert distiller.env_steps == 32
        for old, new in zip(teacher_before, self.model.teacher_parameters()):
            assert torch.equal(old, new)
        assert any(
            not torch.equal(old, new)
            for old, new in zip(student_before, self.model.student_parameters())
        )
        plain = evaluation.evaluate(reference, self.cfg["env"], 10, self.cfg["eval"]["seed"])
        assert plain.as_dict() == before.as_dict()

    def test_needs_unified_model(self):
        with self.assertRaises(UsageError):
            baselines.post_hoc_transfer(baselines.build_oracle(self.cfg), self.cfg, budget=8)


class TestSchemes(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.cfg = tiny_config()
        torch.manual_seed(0)

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_unknown_scheme(self):
        with self.assertRaises(UsageError):
            baselines.run_scheme("bogus", self.cfg, self.tmp)

    def test_ppo(self):
        out_dir = os.path.join(self.tmp, "ppo")
        summary = baselines.run_scheme("ppo", self.cfg, out_dir)
        assert summary["scheme"] == "ppo"
        assert summary["env_steps"] == 64
        assert summary["oracle_env_steps"] == 0
        assert os.path.isfile(os.path.join(out_dir, "final.ultc"))

    def test_oracle_then_offline(self):
        print("Training an oracle and distilling it offline")
        oracle_dir = os.path.join(self.tmp, "oracle")
        summary = baselines.run_scheme("oracle", self.cfg, oracle_dir)
        assert summary["env_steps"] == 64
        assert os.path.isfile(os.path.join(oracle_dir, "oracle_metrics.csv"))
        assert set(summary["metrics"]["per_regime"].keys()) == set(
            terrain.REGIME_TYPES
        )

        out_dir = os.path.join(self.tmp, "offline")
        summary = baselines.run_scheme(
            "offline",
            self.cfg,
            out_dir,
            oracle_checkpoint=os.path.join(oracle_dir, "final.ultc"),
        )
        assert summary["oracle_env_steps"] == 64
        assert summary["env_steps"] == 64
        assert summary["total_env_steps"] == 128
        assert summary["student_fraction"] == 0.0
        assert os.path.isfile(os.path.join(out_dir, "final.ultc"))

    def test_oracle_checkpoint_kind(self):
        train_dir = os.path.join(self.tmp, "ult")
        train(self.cfg, train_dir)
        with self.assertRaises(UsageError):
            baselines.run_scheme(
                "offline",
                self.cfg,
                os.path.join(self.tmp, "offline"),
                oracle_checkpoint=os.path.join(train_dir, "final.ultc"),
            )

    def test_joint_stores_labels(self):
        oracle = baselines.build_oracle(self.cfg)
        trainer = JointTrainer(self.cfg, None, oracle)
        assert trainer.imitation_weight() == 1.0
        assert trainer.model.teacher_head is None
        trainer.collect()
        labels = trainer.storage.labels
        assert labels is not None
        assert labels.shape == (4, 8, self.cfg["net"]["action_dim"])
        assert np.all(np.isfinite(labels))
        row = trainer.run_update()
        assert np.isfinite(row["L_RL"])


if __name__ == "__main__":
    unittest.main()
