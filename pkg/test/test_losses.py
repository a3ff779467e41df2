#!/usr/bin/env pytest
import math
import os
import sys
import unittest

import numpy as np
import torch

sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)) + "/../")
sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)))

from common import tiny_config

from ult_locomotion import losses
from ult_locomotion.errors import ConfigurationError, InternalError
from ult_locomotion.network import NetConfig, ULTNet, log_prob_by_head


def make_batch(model, rng, batch=6):
    net = model.config
    tokens = rng.normal(size=(batch, net.window, net.token_dim))
    lengths = rng.integers(1, net.window + 1, size=batch)
    for i, length in enumerate(lengths):
        tokens[i, length:] = 0.0
    privilege = rng.normal(size=(batch, net.privilege_dim))
    flags = torch.as_tensor(rng.uniform(size=batch) < 0.5)
    actions = model.as_tensor(rng.normal(size=(batch, net.action_dim)))
    return tokens, torch.as_tensor(lengths), privilege, flags, actions


class TestNextPrediction(unittest.TestCase):
    def test_misaligned(self):
        with self.assertRaises(InternalError):
            losses.next_pred_loss(torch.zeros(2, 3, 4), torch.zeros(2, 4, 4))

    def test_manual_value(self):
        predicted = torch.tensor([[[1.0, 0.0], [0.0, 1.0], [7.0, 7.0]]])
        targets = torch.tensor([[[9.0, 9.0], [0.0, 0.0], [0.0, 3.0]]])
        # pairs: |(1,0) - (0,0)|^2 = 1 and |(0,1) - (0,3)|^2 = 4
        value = losses.next_pred_loss(predicted, targets, torch.tensor([3]))
        assert abs(float(value) - 2.5) < 1e-6
        value = losses.next_pred_loss(predicted, targets, torch.tensor([2]))
        assert abs(float(value) - 1.0) < 1e-6
        unbatched = losses.next_pred_loss(predicted[0], targets[0])
        assert abs(float(unbatched) - 2.5) < 1e-6

    def test_windows_without_pairs_are_skipped(self):
        predicted = torch.tensor([[[1.0, 0.0], [0.0, 1.0], [7.0, 7.0]]]).repeat(2, 1, 1)
        targets = torch.tensor([[[9.0, 9.0], [0.0, 0.0], [0.0, 3.0]]]).repeat(2, 1, 1)
        value = losses.next_pred_loss(predicted, targets, torch.tensor([3, 1]))
        assert abs(float(value) - 2.5) < 1e-6

    def test_all_length_one(self):
        predicted = torch.randn(4, 3, 5, requires_grad=True)
        value = losses.next_pred_loss(predicted, torch.randn(4, 3, 5), torch.ones(4, dtype=torch.long))
        assert float(value) == 0.0
        value.backward()
        assert torch.all(predicted.grad == 0)


class TestImitation(unittest.TestCase):
    def test_dot_product_oracle(self):
        rng = np.random.default_rng(0)
        teacher = rng.normal(size=(5, 4))
        student = rng.normal(size=(5, 4))
        value = losses.imitation_loss(
            torch.as_tensor(teacher, dtype=torch.float64), torch.as_tensor(student, dtype=torch.float64)
        )
        diff = teacher - student
        expected = np.mean([np.dot(d, d) for d in diff])
        assert abs(float(value) - expected) <= 1e-12 * max(1.0, expected)

    def test_teacher_gets_no_gradient(self):
        torch.manual_seed(0)
        net = NetConfig.from_dict(tiny_config()["net"])
        model = ULTNet(net)
        rng = np.random.default_rng(1)
        tokens, lengths, privilege, _, _ = make_batch(model, rng)
        outputs = model.evaluate(tokens, lengths, privilege)
        loss = losses.imitation_loss(outputs.teacher_mean, outputs.student_mean)
        loss = loss + losses.next_pred_loss(outputs.predicted_tokens, outputs.target_tokens, lengths)
        loss.backward()
        for p in model.teacher_parameters():
            assert p.grad is None or torch.all(p.grad == 0)
        assert any(
            p.grad is not None and torch.any(p.grad != 0) for p in model.student_parameters()
        )


class TestPPOLoss(unittest.TestCase):
    def setUp(self):
        torch.manual_seed(0)
        self.net = NetConfig.from_dict(tiny_config()["net"])
        self.model = ULTNet(self.net)
        self.rng = np.random.default_rng(2)
        tokens, lengths, privilege, self.flags, self.actions = make_batch(self.model, self.rng)
        with torch.no_grad():
            self.outputs = self.model.evaluate(tokens, lengths, privilege)
            self.log_probs = log_prob_by_head(self.outputs, self.actions, self.flags)
        self.returns = torch.zeros(6)

    def test_missing_flags(self):
        with self.assertRaises(InternalError):
            losses.ppo_loss(
                self.outputs, self.actions, self.log_probs, torch.ones(6), self.returns, None
            )

    def test_ratio_one(self):
        advantages = torch.as_tensor(self.rng.normal(size=6), dtype=torch.float32)
        surrogate, _, _, approx_kl = losses.ppo_loss(
            self.outputs, self.actions, self.log_probs, advantages, self.returns, self.flags
        )
        assert abs(float(surrogate) + float(advantages.mean())) < 1e-6
        assert abs(float(approx_kl)) < 1e-6

    def test_clipping(self):
        old = self.log_probs - math.log(2.0)
        positive = torch.ones(6)
        surrogate, _, _, _ = losses.ppo_loss(
            self.outputs, self.actions, old, positive, self.returns, self.flags, clip_range=0.2
        )
        assert abs(float(surrogate) + 1.2) < 1e-5
        negative = -torch.ones(6)
        surrogate, _, _, _ = losses.ppo_loss(
            self.outputs, self.actions, old, negative, self.returns, self.flags, clip_range=0.2
        )
        assert abs(float(surrogate) - 2.0) < 1e-5

    def test_clip_range_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            losses.LossWeights(clip_range=0.0)
        with self.assertRaises(ConfigurationError):
            losses.LossWeights(beta=float("nan"))

    def test_total_composition(self):
        weights = losses.LossWeights(beta=0.5, ult_weight=2.0, value_coef=0.7, entropy_coef=0.01)
        minibatch = {
            "actions": self.actions,
            "log_probs": self.log_probs,
            "advantages": torch.ones(6),
            "returns": torch.ones(6),
            "values": torch.zeros(6),
            "teacher_flags": self.flags,
        }
        total, report = losses.compute_losses(self.outputs, minibatch, None, weights)
        rl = report.surrogate + 0.7 * report.value - 0.01 * report.entropy
        assert abs(report.rl - rl) < 1e-5
        assert abs(report.ult - (report.next_pred + 0.5 * report.imitation)) < 1e-5
        assert abs(report.total - (rl + 2.0 * report.ult)) < 1e-5
        assert abs(float(total) - report.total) < 1e-6
        assert report.next_pred > 0 and report.imitation > 0

    def test_disabled_next_prediction(self):
        weights = losses.LossWeights(use_next_prediction=False)
        minibatch = {
            "actions": self.actions,
            "log_probs": self.log_probs,
            "advantages": torch.ones(6),
            "returns": torch.ones(6),
            "teacher_flags": self.flags,
        }
        _, report = losses.compute_losses(self.outputs, minibatch, None, weights)
        assert report.next_pred == 0.0
        assert report.ult == report.imitation


class TestGradients(unittest.TestCase):
    def test_finite_differences(self):
        print("Comparing analytic gradients with central finite differences")
        torch.manual_seed(3)
        net = NetConfig.from_dict(tiny_config()["net"])
        assert net.embed_dim == 16 and net.num_layers == 1
        model = ULTNet(net).double()
        rng = np.random.default_rng(3)
        tokens, lengths, privilege, flags, actions = make_batch(model, rng)
        weights = losses.LossWeights(beta=0.7, ult_weight=1.3)
        with torch.no_grad():
            outputs = model.evaluate(tokens, lengths, privilege)
            old_log_probs = log_prob_by_head(outputs, actions, flags) - 0.05
            teacher_target = outputs.teacher_mean.clone()
        minibatch = {
            "actions": actions,
            "log_probs": old_log_probs,
            "advantages": model.as_tensor(rng.normal(size=6)),
            "returns": model.as_tensor(rng.normal(size=6)),
            "values": model.as_tensor(rng.normal(size=6)),
            "teacher_flags": flags,
        }

        def fixed_target_loss():
            # the imitation target is a constant of the parameters
            out = model.evaluate(tokens, lengths, privilege)
            surrogate, value, entropy, _ = losses.ppo_loss(
                out,
                minibatch["actions"],
                minibatch["log_probs"],
                minibatch["advantages"],
                minibatch["returns"],
                flags,
                clip_range=weights.clip_range,
            )
            rl = losses.rl_loss(surrogate, value, entropy, weights)
            next_pred = losses.next_pred_loss(out.predicted_tokens, out.target_tokens, lengths)
            imitation = losses.imitation_loss(teacher_target, out.student_mean)
            return losses.total_loss(rl, losses.ult_loss(next_pred, imitation, weights.beta), weights)

        model.zero_grad()
        total, _ = losses.compute_losses(model.evaluate(tokens, lengths, privilege), minibatch, lengths, weights)
        with torch.no_grad():
            assert abs(float(total) - float(fixed_target_loss())) < 1e-12
        total.backward()

        eps = 1e-4
        checked = 0
        passed = 0
        for name, param in model.named_parameters():
            flat = param.data.view(-1)
            grad = param.grad.view(-1) if param.grad is not None else torch.zeros_like(flat)
            picks = rng.choice(flat.numel(), size=min(20, flat.numel()), replace=False)
            for index in picks:
                original = float(flat[index])
                with torch.no_grad():
                    flat[index] = original + eps
                    plus = float(fixed_target_loss())
                    flat[index] = original - eps
                    minus = float(fixed_target_loss())
                    flat[index] = original
                numeric = (plus - minus) / (2 * eps)
                analytic = float(grad[index])
                scale = max(abs(numeric), abs(analytic), 1e-3)
                checked += 1
                if abs(numeric - analytic) <= 1e-4 * scale:
                    passed += 1
                else:
                    print("{}[{}]: analytic {} numeric {}".format(name, index, analytic, numeric))
        print("{} of {} gradient entries agree".format(passed, checked))
        assert passed >= 0.99 * checked


if __name__ == "__main__":
    unittest.main()
