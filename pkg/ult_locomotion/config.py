#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Configuration defaults, loading and validation.

A configuration is a JSON document (with optional // comments) holding the
sections env, net, train, mixer, losses, eval and baselines. User documents
are merged over DEFAULTS; keys unknown to DEFAULTS are rejected.
"""

import copy
import math

from . import log, utils
from .errors import ConfigurationError

logger = log.setup_custom_logger("ult_locomotion")

REGIME_TYPES = ["smooth_slope", "rough_slope", "stairs_up", "stairs_down", "discrete"]

# number of scalar fields of DynamicsParams once flattened (push is per-axis)
DYNAMICS_DIM = 10
# base velocity (2) + heading (1)
TRUE_STATE_DIM = 3

DEFAULTS = {
    "env": {
        "num_joints": 4,
        "num_feet": 2,
        "ang_vel_dims": 1,
        "terrain_samples": 5,
        "terrain_sample_spacing": 0.2,
        "sim_dt": 0.005,
        "decimation": 4,
        "episode_length_s": 20.0,
        "command_resample_s": 10.0,
        "push_interval_s": 5.0,
        "kp": 30.0,
        "kd": 0.7,
        "torque_limit": 5.0,
        "clip_actions": 10.0,
        "base_mass": 12.0,
        "yaw_inertia": 1.0,
        "linear_damping": 20.0,
        "yaw_damping": 2.0,
        # rows: vx, vy, yaw; one column per joint
        "drive_matrix": [
            [2.5, 2.5, 2.5, 2.5],
            [2.5, -2.5, -2.5, 2.5],
            [0.5, 0.5, -0.5, -0.5],
        ],
        "heading_gain": 0.5,
        "gait_phase_gain": 4.0 * math.pi,
        "crash_speed": 3.0,
        "arena_half_extent": 20.0,
        "max_init_level": 4,
        "randomization": {
            "kp_scale": [0.9, 1.1],
            "kd_scale": [0.9, 1.1],
            "friction_scale": [0.7, 1.3],
            "motor_strength_scale": [0.9, 1.1],
            "payload_mass": [0.0, 5.0],
            "payload_com_offset": [-0.1, 0.1],
            "gravity": [9.41, 10.21],
            "system_delay": [0.0, 0.015],
            "push_velocity": [-1.0, 1.0],
        },
        "commands": {
            "lin_vel": [-0.5, 0.5],
            "heading": [-math.pi, math.pi],
            "ang_vel_cap": 0.5,
        },
        "terrain": {
            "proportions": [0.1, 0.1, 0.35, 0.25, 0.2],
            "max_level": 9,
            "max_slope": 0.2,
            "max_roughness": 0.04,
            "roughness_wavelength": 0.5,
            "roughness_noise_gain": 10.0,
            "max_step_height": 0.08,
            "step_width": 0.4,
            "max_obstacle_height": 0.06,
            "obstacle_wavelength": 1.0,
            "max_push_scale": 1.0,
        },
        "curriculum": {
            "promote_fraction": 0.8,
            "demote_fraction": 0.25,
        },
        "reward_scales": {
            "lin_vel_tracking": 1.0,
            "ang_vel_tracking": 0.5,
            "body_z_velocity": -2.0,
            "body_rotation": -0.05,
            "joint_acceleration": -2.5e-7,
            "output_work": -2.0e-5,
            "action_rate": -0.05,
            "feet_slip": -0.1,
            "collision": -1.0,
        },
        "tracking_sharpness": 5.0,
    },
    "net": {
        "obs_dim": None,
        "action_dim": None,
        "privilege_dim": None,
        "window": 15,
        "embed_dim": 128,
        "num_layers": 2,
        "num_heads": 4,
        "ff_dim": 256,
        "encoder_hidden": [256, 128],
        "teacher_hidden": [128, 64],
        "value_hidden": [64],
        "init_log_std": -1.0,
        "log_std_bounds": [-4.0, 1.0],
        "use_teacher": True,
        "value_from_privilege": True,
        "normalize_observations": False,
    },
    "train": {
        "num_agents": 256,
        "horizon": 24,
        "mini_epochs": 5,
        "minibatch_size": 1536,
        "learning_rate": 3e-3,
        "lr_schedule": "adaptive-kl",
        "lr_bounds": [1e-6, 1e-2],
        "cosine_final_lr": 3e-5,
        "desired_kl": 0.008,
        "weight_decay": 0.01,
        "gamma": 0.99,
        "gae_lambda": 0.95,
        "total_updates": 1500,
        "seed": 1,
        "max_grad_norm": 1.0,
        "checkpoint_interval": 100,
        "max_incidents": 3,
    },
    "mixer": {
        "alpha": 0.6,
        "resample_period": 24,
    },
    "losses": {
        "beta": 1.0,
        "ult_weight": 1.0,
        "value_coef": 1.0,
        "entropy_coef": 0.005,
        "clip_range": 0.2,
        "use_next_prediction": True,
        "clipped_value": False,
    },
    "eval": {
        "episodes": 500,
        "seed": 12345,
    },
    "baselines": {
        "oracle_hidden": [256, 128, 64],
        "critic_hidden": [256, 128, 64],
        "distill_learning_rate": 1e-3,
        "distill_epochs": 5,
        "distill_minibatch": 512,
        "dataset_capacity": 200000,
        "dagger_iteration_steps": None,
        "offline_budget": None,
        "online_budget": None,
        "post_hoc_budget": None,
        "joint_initial_weight": 1.0,
    },
}

LR_SCHEDULES = ["adaptive-kl", "cosine"]


def obs_dim(env_cfg):
    """
    Dimension m of one proprioceptive observation:
    q, q_dot, angular velocity, gravity tilt, foot contacts, command
    """
    return (
        2 * env_cfg["num_joints"]
        + env_cfg["ang_vel_dims"]
        + 3
        + env_cfg["num_feet"]
        + 3
    )


def privilege_dim(env_cfg):
    return DYNAMICS_DIM + TRUE_STATE_DIM + env_cfg["terrain_samples"]


def _merge(defaults, user, path):
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        where = "{}.{}".format(path, key) if path else key
        if key not in defaults:
            raise ConfigurationError("Unknown configuration key: {}".format(where))
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(
                    "Configuration key {} must be a section".format(where)
                )
            merged[key] = _merge(defaults[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _check_range(name, bounds):
    if len(bounds) != 2:
        raise ConfigurationError("Range {} must have two entries".format(name))
    if not bounds[0] <= bounds[1]:
        raise ConfigurationError(
            "Inverted range {}: [{}, {}]".format(name, bounds[0], bounds[1])
        )


def _check_positive(section, keys):
    for key in keys:
        if not section[key] > 0:
            raise ConfigurationError(
                "{} must be positive, got {}".format(key, section[key])
            )


def validate(cfg):
    """
    Validate a merged configuration and fill in derived dimensions.

    Arguments:
        cfg {dict} -- merged configuration

    Returns:
        dict -- the same configuration, with net.obs_dim/action_dim/privilege_dim set
    """
    env = cfg["env"]
    net = cfg["net"]
    train = cfg["train"]

    _check_positive(
        env,
        [
            "num_joints",
            "num_feet",
            "terrain_samples",
            "sim_dt",
            "decimation",
            "episode_length_s",
            "base_mass",
            "yaw_inertia",
        ],
    )
    if env["ang_vel_dims"] not in (1, 3):
        raise ConfigurationError("ang_vel_dims must be 1 or 3")
    drive = env["drive_matrix"]
    if len(drive) != 3 or any(len(row) != env["num_joints"] for row in drive):
        raise ConfigurationError(
            "drive_matrix must be 3 x num_joints ({})".format(env["num_joints"])
        )
    for name, bounds in env["randomization"].items():
        _check_range(name, bounds)
    _check_range("commands.lin_vel", env["commands"]["lin_vel"])
    _check_range("commands.heading", env["commands"]["heading"])

    proportions = env["terrain"]["proportions"]
    if len(proportions) != len(REGIME_TYPES):
        raise ConfigurationError(
            "terrain.proportions needs {} entries".format(len(REGIME_TYPES))
        )
    if abs(sum(proportions) - 1.0) > 1e-9 or min(proportions) < 0:
        raise ConfigurationError("terrain.proportions must be a distribution")
    if not 0 <= env["max_init_level"] <= env["terrain"]["max_level"]:
        raise ConfigurationError("max_init_level outside [0, max_level]")
    curriculum = env["curriculum"]
    if not 0 <= curriculum["demote_fraction"] <= curriculum["promote_fraction"]:
        raise ConfigurationError("curriculum thresholds must satisfy 0 <= demote <= promote")

    derived = {
        "obs_dim": obs_dim(env),
        "action_dim": env["num_joints"],
        "privilege_dim": privilege_dim(env),
    }
    for key, value in derived.items():
        if net[key] is not None and net[key] != value:
            raise ConfigurationError(
                "net.{} = {} does not match the environment ({})".format(
                    key, net[key], value
                )
            )
        net[key] = value

    _check_positive(net, ["window", "embed_dim", "num_layers", "num_heads", "ff_dim"])
    if net["embed_dim"] % net["num_heads"] != 0:
        raise ConfigurationError(
            "embed_dim {} is not divisible by num_heads {}".format(
                net["embed_dim"], net["num_heads"]
            )
        )
    _check_range("net.log_std_bounds", net["log_std_bounds"])

    _check_positive(
        train,
        [
            "num_agents",
            "horizon",
            "mini_epochs",
            "minibatch_size",
            "learning_rate",
            "total_updates",
            "checkpoint_interval",
        ],
    )
    if (train["horizon"] * train["num_agents"]) % train["minibatch_size"] != 0:
        raise ConfigurationError(
            "minibatch_size {} does not divide horizon * num_agents = {}".format(
                train["minibatch_size"], train["horizon"] * train["num_agents"]
            )
        )
    if train["lr_schedule"] not in LR_SCHEDULES:
        raise ConfigurationError(
            "Unknown lr_schedule {}, use any of {}".format(
                train["lr_schedule"], LR_SCHEDULES
            )
        )
    _check_range("train.lr_bounds", train["lr_bounds"])

    alpha = cfg["mixer"]["alpha"]
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("mixer.alpha must lie in [0, 1], got {}".format(alpha))
    if cfg["mixer"]["resample_period"] <= 0:
        raise ConfigurationError("mixer.resample_period must be positive")
    if alpha > 0 and not net["use_teacher"]:
        raise ConfigurationError("mixer.alpha > 0 needs net.use_teacher")

    losses = cfg["losses"]
    if not losses["clip_range"] > 0:
        raise ConfigurationError("losses.clip_range must be positive")
    for key in ["beta", "ult_weight", "value_coef", "entropy_coef"]:
        if not math.isfinite(losses[key]):
            raise ConfigurationError("losses.{} must be finite".format(key))

    if cfg["eval"]["episodes"] <= 0:
        raise ConfigurationError("eval.episodes must be positive")
    return cfg


def load_config(config_file=None, overrides=None):
    """
    Load a configuration.

    Arguments:
        config_file {str} -- JSON file with optional // comments, or None for defaults
        overrides {dict} -- nested dict merged on top of the file (e.g. from CLI flags)

    Returns:
        dict -- validated configuration
    """
    cfg = copy.deepcopy(DEFAULTS)
    if config_file is not None:
        logger.debug("Loading configuration from {}".format(config_file))
        user = utils.read_json_without_comments(config_file)
        if not isinstance(user, dict):
            raise ConfigurationError("Configuration file must hold a JSON object")
        cfg = _merge(DEFAULTS, user, "")
    if overrides:
        cfg = _merge(cfg, overrides, "")
    return validate(cfg)


def with_overrides(cfg, overrides):
    """
    Return a validated copy of cfg with a nested override dict applied
    """
    base = copy.deepcopy(cfg)
    if "env" in overrides:
        # dims are re-derived from the overridden environment
        for key in ["obs_dim", "action_dim", "privilege_dim"]:
            base["net"][key] = None
    return validate(_merge(base, overrides, ""))


if __name__ == "__main__":
    print("this is only a module")
