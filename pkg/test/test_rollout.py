#!/usr/bin/env pytest
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)) + "/../")

from ult_locomotion.errors import ConfigurationError, InternalError
from ult_locomotion.rollout import RolloutStorage, compute_gae, normalize_advantages
from ult_locomotion.trajectorywindow import TrajectoryWindow, push_step, tokenize


def brute_force_gae(rewards, values, dones, gamma, lam):
    """
    Sum of (gamma * lam)^k delta_{t+k}, cut at terminal steps; values has the
    bootstrap tail
    """
    steps = len(rewards)
    deltas = [
        rewards[t] + gamma * values[t + 1] * (1.0 - dones[t]) - values[t] for t in range(steps)
    ]
    advantages = []
    for t in range(steps):
        total = 0.0
        factor = 1.0
        for k in range(t, steps):
            total += factor * deltas[k]
            if dones[k]:
                break
            factor *= gamma * lam
        advantages.append(total)
    return np.array(advantages)


class TestTrajectoryWindow(unittest.TestCase):
    def test_tokenize(self):
        z = tokenize(np.ones(17), np.zeros(4), 17, 4)
        assert z.shape == (21,)
        assert z[:17].sum() == 17 and z[17:].sum() == 0
        batch = tokenize(np.ones((3, 17)), np.ones((3, 4)), 17, 4)
        assert batch.shape == (3, 21)
        with self.assertRaises(ConfigurationError):
            tokenize(np.ones(16), np.zeros(4), 17, 4)
        with self.assertRaises(ConfigurationError):
            tokenize(np.ones(17), np.zeros(3), 17, 4)

    def test_left_aligned_start(self):
        window = TrajectoryWindow(2, 2, 1, capacity=3)
        window.start_episode(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert window.lengths.tolist() == [1, 1]
        assert window.tokens[0, 0].tolist() == [1.0, 2.0, 0.0]
        assert np.all(window.tokens[:, 1:] == 0)

    def test_eviction_matches_list_reference(self):
        print("Comparing window contents with a list-based reference")
        rng = np.random.default_rng(0)
        capacity = 15
        window = TrajectoryWindow(1, 3, 2, capacity=capacity)
        first = rng.normal(size=3)
        window.start_episode(first.reshape(1, 3))
        reference = [np.concatenate([first, np.zeros(2)])]
        for k in range(40):
            obs = rng.normal(size=3)
            action = rng.normal(size=2)
            push_step(window, obs, action)
            reference.append(np.concatenate([obs, action]))
            expected = np.array(reference[-capacity:])
            length = window.lengths[0]
            assert length == min(len(reference), capacity)
            assert np.array_equal(window.tokens[0, :length], expected)
            assert np.all(window.tokens[0, length:] == 0)

    def test_partial_agents(self):
        window = TrajectoryWindow(3, 1, 1, capacity=4)
        window.start_episode(np.zeros((3, 1)))
        window.push_step(np.ones((2, 1)), np.ones((2, 1)), np.array([0, 2]))
        assert window.lengths.tolist() == [2, 1, 2]
        window.start_episode(np.full((1, 1), 5.0), np.array([2]))
        assert window.lengths.tolist() == [2, 1, 1]
        assert window.tokens[2, 0].tolist() == [5.0, 0.0]
        assert window.tokens[0, 1].tolist() == [1.0, 1.0]

    def test_state_dict(self):
        window = TrajectoryWindow(2, 2, 1, capacity=3)
        window.start_episode(np.ones((2, 2)))
        other = TrajectoryWindow(2, 2, 1, capacity=3)
        other.load_state_dict(window.state_dict())
        tokens, lengths = other.snapshot()
        assert np.array_equal(tokens, window.tokens)
        assert np.array_equal(lengths, window.lengths)


class TestGAE(unittest.TestCase):
    def test_hand_example(self):
        advantages, returns = compute_gae(
            np.array([1.0, 1.0]), np.zeros(3), np.zeros(2), gamma=0.99, lam=0.95
        )
        assert abs(advantages[0] - 1.9405) < 1e-12
        assert abs(advantages[1] - 1.0) < 1e-12
        assert np.allclose(returns, advantages)

    def test_zero_discount(self):
        rng = np.random.default_rng(1)
        rewards = rng.normal(size=6)
        values = rng.normal(size=7)
        advantages, _ = compute_gae(rewards, values, np.zeros(6), gamma=0.0, lam=0.7)
        assert np.allclose(advantages, rewards - values[:6], rtol=0, atol=1e-15)

    def test_brute_force_oracle(self):
        print("Checking GAE against the brute-force discounted sum")
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(10000):
            steps = int(rng.integers(1, 9))
            rewards = rng.normal(size=steps)
            values = rng.normal(size=steps + 1)
            dones = (rng.uniform(size=steps) < 0.2).astype(float)
            gamma = rng.uniform(0.9, 1.0)
            lam = rng.uniform(0.8, 1.0)
            advantages, returns = compute_gae(rewards, values, dones, gamma=gamma, lam=lam)
            expected = brute_force_gae(rewards, values, dones, gamma, lam)
            worst = max(worst, float(np.max(np.abs(advantages - expected))))
            assert np.allclose(returns, advantages + values[:steps], rtol=0, atol=1e-12)
        print("worst error: {}".format(worst))
        assert worst <= 1e-10

    def test_batched_agents(self):
        rng = np.random.default_rng(3)
        rewards = rng.normal(size=(5, 4))
        values = rng.normal(size=(6, 4))
        dones = (rng.uniform(size=(5, 4)) < 0.3).astype(float)
        advantages, _ = compute_gae(rewards, values, dones)
        for agent in range(4):
            expected = brute_force_gae(
                rewards[:, agent], values[:, agent], dones[:, agent], 0.99, 0.95
            )
            assert np.allclose(advantages[:, agent], expected, rtol=0, atol=1e-10)

    def test_bootstrap_argument(self):
        rng = np.random.default_rng(4)
        rewards = rng.normal(size=(5, 3))
        values = rng.normal(size=(6, 3))
        dones = np.zeros((5, 3))
        with_tail, _ = compute_gae(rewards, values, dones)
        separate, _ = compute_gae(rewards, values[:5], dones, bootstrap_value=values[5])
        assert np.array_equal(with_tail, separate)

    def test_misaligned(self):
        with self.assertRaises(InternalError):
            compute_gae(np.zeros(3), np.zeros(3), np.zeros(3))
        with self.assertRaises(InternalError):
            compute_gae(np.zeros(3), np.zeros(4), np.zeros(2))

    def test_normalize_advantages(self):
        rng = np.random.default_rng(5)
        advantages = rng.normal(3.0, 2.0, size=500)
        normalized = normalize_advantages(advantages)
        assert abs(normalized.mean()) < 1e-12
        assert abs(normalized.std() - 1.0) < 1e-12
        assert np.all(normalize_advantages(np.full(10, 4.2)) == 0)


class TestRolloutStorage(unittest.TestCase):
    def fill(self, storage, steps):
        agents = storage.num_agents
        for t in range(steps):
            storage.add(
                np.zeros((agents, 2, 3)),
                np.ones(agents),
                np.zeros((agents, 2)),
                np.full((agents, 1), float(t)),
                np.zeros(agents, dtype=bool),
                np.zeros(agents),
                np.zeros(agents),
            )
            storage.add_outcome(np.ones(agents), np.zeros(agents))

    def test_overflow_and_incomplete(self):
        storage = RolloutStorage(2, 3, 2, 3, 2, 1)
        self.fill(storage, 1)
        with self.assertRaises(InternalError):
            storage.finish(np.zeros(3), 0.99, 0.95)
        self.fill(storage, 1)
        with self.assertRaises(InternalError):
            self.fill(storage, 1)

    def test_finish_flattens_time_major(self):
        storage = RolloutStorage(4, 3, 2, 3, 2, 1)
        self.fill(storage, 4)
        batch = storage.finish(np.zeros(3), 0.99, 0.95)
        assert len(batch) == 12
        assert batch.actions[:, 0].tolist() == [0.0] * 3 + [1.0] * 3 + [2.0] * 3 + [3.0] * 3
        assert batch.labels is None
        assert batch.tokens.shape == (12, 2, 3)

    def test_minibatch_coverage(self):
        storage = RolloutStorage(4, 3, 2, 3, 2, 1)
        self.fill(storage, 4)
        batch = storage.finish(np.zeros(3), 0.99, 0.95)
        rng = np.random.default_rng(0)
        seen = np.concatenate(list(batch.minibatches(4, rng)))
        assert sorted(seen.tolist()) == list(range(12))
        with self.assertRaises(InternalError):
            list(batch.minibatches(5, rng))


if __name__ == "__main__":
    unittest.main()
