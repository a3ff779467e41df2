#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.
"""

import numpy as np

from . import log
from .errors import ConfigurationError

logger = log.setup_custom_logger("ult_locomotion")


def tokenize(observation, prev_action, obs_dim, action_dim):
    """
    Build tokens z = [o || a_prev].

    Arguments:
        observation {np.ndarray} -- (m,) or (N, m)
        prev_action {np.ndarray} -- (n,) or (N, n)
        obs_dim {int} -- m
        action_dim {int} -- n

    Returns:
        np.ndarray -- (m + n,) or (N, m + n)
    """
    observation = np.asarray(observation, dtype=float)
    prev_action = np.asarray(prev_action, dtype=float)
    if observation.shape[-1] != obs_dim:
        raise ConfigurationError(
            "Observation has {} entries, expected {}".format(observation.shape[-1], obs_dim)
        )
    if prev_action.shape[-1] != action_dim:
        raise ConfigurationError(
            "Action has {} entries, expected {}".format(prev_action.shape[-1], action_dim)
        )
    return np.concatenate([observation, prev_action], axis=-1)


class TrajectoryWindow:
    """
    Rolling windows of (o_k, a_{k-1}) tokens for a batch of agents.

    Tokens are stored oldest first and left aligned; entries at index
    >= lengths[i] are zero. A full window evicts its oldest token.
    """

    def __init__(self, num_agents, obs_dim, action_dim, capacity=15):
        self.num_agents = num_agents
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.capacity = capacity
        self.tokens = np.zeros((num_agents, capacity, obs_dim + action_dim))
        self.lengths = np.zeros(num_agents, dtype=np.int64)

    def __len__(self):
        return self.num_agents

    def reset(self, agents=None):
        if agents is None:
            agents = np.arange(self.num_agents)
        self.tokens[agents] = 0.0
        self.lengths[agents] = 0

    def push_step(self, observation, prev_action, agents=None):
        """
        Append one pair per agent (all agents unless `agents` is given)
        """
        if agents is None:
            agents = np.arange(self.num_agents)
        agents = np.asarray(agents, dtype=np.int64)
        z = tokenize(observation, prev_action, self.obs_dim, self.action_dim)
        z = z.reshape(len(agents), -1)

        full = self.lengths[agents] >= self.capacity
        shift = agents[full]
        if len(shift):
            self.tokens[shift, :-1] = self.tokens[shift, 1:]
            self.tokens[shift, -1] = z[full]
        grow = agents[~full]
        if len(grow):
            self.tokens[grow, self.lengths[grow]] = z[~full]
            self.lengths[grow] += 1
        return self

    def start_episode(self, observation, agents=None):
        """
        Clear the windows and push the first pair with the zero previous action
        """
        if agents is None:
            agents = np.arange(self.num_agents)
        self.reset(agents)
        zeros = np.zeros((len(agents), self.action_dim))
        return self.push_step(np.reshape(observation, (len(agents), -1)), zeros, agents)

    def snapshot(self):
        return self.tokens.copy(), self.lengths.copy()

    def state_dict(self):
        return {"tokens": self.tokens.copy(), "lengths": self.lengths.copy()}

    def load_state_dict(self, state):
        self.tokens = np.array(state["tokens"], dtype=float)
        self.lengths = np.array(state["lengths"], dtype=np.int64)


def push_step(window, observation, prev_action):
    """
    Single-agent convenience wrapper around TrajectoryWindow.push_step
    """
    return window.push_step(
        np.reshape(observation, (1, -1)), np.reshape(prev_action, (1, -1))
    )


if __name__ == "__main__":
    print("this is only a module")
