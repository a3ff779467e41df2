#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

On-policy rollout storage and generalized advantage estimation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import log
from .errors import InternalError

logger = log.setup_custom_logger("ult_locomotion")

ADVANTAGE_EPS = 1e-8


def compute_gae(rewards, values, dones, bootstrap_value=None, gamma=0.99, lam=0.95):
    """
    Generalized advantage estimation over the time axis (axis 0).

    Arguments:
        rewards {np.ndarray} -- (T,) or (T, X)
        values {np.ndarray} -- (T, ...) value estimates, or (T + 1, ...) with the bootstrap tail
        dones {np.ndarray} -- (T, ...) terminal flags; no value is carried across them

    Keyword Arguments:
        bootstrap_value {np.ndarray} -- V(s_T) when values has no tail (default: None)
        gamma {float} -- reward discount (default: 0.99)
        lam {float} -- GAE discount (default: 0.95)

    Returns:
        tuple -- (advantages, returns), returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    steps = len(rewards)
    if bootstrap_value is None:
        if len(values) != steps + 1:
            raise InternalError(
                "values needs {} entries with its bootstrap tail, got {}".format(
                    steps + 1, len(values)
                )
            )
        tail = values[steps]
        values = values[:steps]
    else:
        tail = np.asarray(bootstrap_value, dtype=float)
    if len(values) != steps or len(dones) != steps:
        raise InternalError("rewards, values and dones must share their length")

    advantages = np.zeros_like(rewards)
    last = np.zeros_like(rewards[0]) if steps else 0.0
    for t in reversed(range(steps)):
        next_value = tail if t == steps - 1 else values[t + 1]
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        last = delta + gamma * lam * not_done * last
        advantages[t] = last
    return advantages, advantages + values


def normalize_advantages(advantages):
    """
    Shift and scale to zero mean and unit (population) standard deviation;
    degenerate spreads map to zeros.
    """
    advantages = np.asarray(advantages, dtype=float)
    std = advantages.std()
    if not std >= ADVANTAGE_EPS:
        return np.zeros_like(advantages)
    return (advantages - advantages.mean()) / std


@dataclass
class RolloutBatch:
    """
    Flattened (horizon * agents) samples consumed by the update phase.
    teacher_flags holds the mixer mask active when each action was executed.
    """

    tokens: np.ndarray
    lengths: np.ndarray
    privilege: np.ndarray
    actions: np.ndarray
    teacher_flags: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    labels: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.actions)

    def normalized(self):
        self.advantages = normalize_advantages(self.advantages)
        return self

    def minibatches(self, minibatch_size, rng):
        """
        Shuffled minibatches of indices, one full pass over the batch
        """
        if len(self) % minibatch_size != 0:
            raise InternalError(
                "minibatch size {} does not divide batch size {}".format(
                    minibatch_size, len(self)
                )
            )
        order = rng.permutation(len(self))
        for start in range(0, len(self), minibatch_size):
            yield order[start : start + minibatch_size]


class RolloutStorage:
    """
    Fixed-horizon buffer for X agents, filled step by step during collection.
    """

    def __init__(self, horizon, num_agents, window, token_dim, privilege_dim, action_dim):
        self.horizon = horizon
        self.num_agents = num_agents
        self.tokens = np.zeros((horizon, num_agents, window, token_dim))
        self.lengths = np.zeros((horizon, num_agents), dtype=np.int64)
        self.privilege = np.zeros((horizon, num_agents, privilege_dim))
        self.actions = np.zeros((horizon, num_agents, action_dim))
        self.teacher_flags = np.zeros((horizon, num_agents), dtype=bool)
        self.log_probs = np.zeros((horizon, num_agents))
        self.values = np.zeros((horizon, num_agents))
        self.rewards = np.zeros((horizon, num_agents))
        self.dones = np.zeros((horizon, num_agents))
        self.labels = None
        self.action_dim = action_dim
        self.step = 0

    def clear(self):
        self.step = 0

    def add(
        self, tokens, lengths, privilege, actions, teacher_flags, log_probs, values, labels=None
    ):
        if self.step >= self.horizon:
            raise InternalError("Rollout storage overflow")
        t = self.step
        self.tokens[t] = tokens
        self.lengths[t] = lengths
        self.privilege[t] = privilege
        self.actions[t] = actions
        self.teacher_flags[t] = teacher_flags
        self.log_probs[t] = log_probs
        self.values[t] = values
        if labels is not None:
            if self.labels is None:
                self.labels = np.zeros((self.horizon, self.num_agents, self.action_dim))
            self.labels[t] = labels

    def add_outcome(self, rewards, dones):
        t = self.step
        self.rewards[t] = rewards
        self.dones[t] = dones
        self.step += 1

    def finish(self, bootstrap_value, gamma, lam):
        """
        Run GAE and flatten into a RolloutBatch (time-major order)
        """
        if self.step != self.horizon:
            raise InternalError(
                "Rollout incomplete: {} of {} steps".format(self.step, self.horizon)
            )
        advantages, returns = compute_gae(
            self.rewards, self.values, self.dones, bootstrap_value, gamma, lam
        )

        def flat(x):
            return x.reshape((self.horizon * self.num_agents,) + x.shape[2:])

        return RolloutBatch(
            tokens=flat(self.tokens),
            lengths=flat(self.lengths),
            privilege=flat(self.privilege),
            actions=flat(self.actions),
            teacher_flags=flat(self.teacher_flags),
            log_probs=flat(self.log_probs),
            values=flat(self.values),
            rewards=flat(self.rewards),
            dones=flat(self.dones),
            advantages=flat(advantages),
            returns=flat(returns),
            labels=None if self.labels is None else flat(self.labels),
        )


if __name__ == "__main__":
    print("this is only a module")
