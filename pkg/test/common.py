#!/usr/bin/env python3
"""
Shared fixtures: a configuration small enough for unit tests.
"""
import copy
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.realpath(__file__)) + "/../")

from ult_locomotion.config import load_config

TINY_OVERRIDES = {
    "env": {
        "episode_length_s": 0.4,
        "command_resample_s": 0.2,
    },
    "net": {
        "window": 4,
        "embed_dim": 16,
        "num_layers": 1,
        "num_heads": 2,
        "ff_dim": 32,
        "encoder_hidden": [16],
        "teacher_hidden": [16],
        "value_hidden": [8],
    },
    "train": {
        "num_agents": 8,
        "horizon": 4,
        "mini_epochs": 2,
        "minibatch_size": 16,
        "total_updates": 2,
        "checkpoint_interval": 1,
    },
    "eval": {
        "episodes": 10,
        "seed": 7,
    },
    "baselines": {
        "oracle_hidden": [16, 16],
        "critic_hidden": [16],
        "distill_epochs": 2,
        "distill_minibatch": 16,
        "dataset_capacity": 256,
        "dagger_iteration_steps": 32,
    },
}


def merge(base, extra):
    merged = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def tiny_overrides(extra=None):
    return merge(TINY_OVERRIDES, extra or {})


def tiny_config(extra=None):
    return load_config(None, tiny_overrides(extra))
