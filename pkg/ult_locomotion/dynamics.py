#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Planar commander dynamics: hidden randomized parameters, robot state,
observation split and the PD substep integrator.

All arrays carry a leading agent dimension N; a single instance is N = 1.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import log, utils
from .errors import ConfigurationError

logger = log.setup_custom_logger("ult_locomotion")

DYNAMICS_FIELDS = [
    "kp_scale",
    "kd_scale",
    "friction_scale",
    "motor_strength_scale",
    "payload_mass",
    "payload_com_offset",
    "gravity",
    "system_delay",
]

# one standard normal triple (vx, vy, yaw) per substep
NOISE_CHANNELS = 3


@dataclass
class DynamicsParams:
    kp_scale: np.ndarray
    kd_scale: np.ndarray
    friction_scale: np.ndarray
    motor_strength_scale: np.ndarray
    payload_mass: np.ndarray
    payload_com_offset: np.ndarray
    gravity: np.ndarray
    system_delay: np.ndarray
    push_velocity: np.ndarray

    def __len__(self):
        return len(self.kp_scale)

    def as_array(self):
        """
        Flattened d_t, shape (N, 10)
        """
        scalars = [getattr(self, name)[:, None] for name in DYNAMICS_FIELDS]
        return np.concatenate(scalars + [self.push_velocity], axis=1)

    def delay_steps(self, control_dt):
        """
        System delay quantized to whole control steps
        """
        return np.rint(self.system_delay / control_dt).astype(np.int64)

    def assign(self, index, other):
        for f in fields(self):
            getattr(self, f.name)[index] = getattr(other, f.name)

    def subset(self, index):
        return DynamicsParams(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    @classmethod
    def concatenate(cls, items):
        return cls(
            **{
                f.name: np.concatenate([getattr(item, f.name) for item in items])
                for f in fields(cls)
            }
        )


@dataclass
class Command:
    v_x: np.ndarray
    v_y: np.ndarray
    omega_z: np.ndarray
    heading_des: np.ndarray

    def as_array(self):
        return np.stack([self.v_x, self.v_y, self.omega_z], axis=1)

    def assign(self, index, other):
        for f in fields(self):
            getattr(self, f.name)[index] = getattr(other, f.name)

    @classmethod
    def concatenate(cls, items):
        return cls(
            **{
                f.name: np.concatenate([getattr(item, f.name) for item in items])
                for f in fields(cls)
            }
        )


@dataclass
class RobotState:
    base_velocity: np.ndarray
    yaw_rate: np.ndarray
    heading: np.ndarray
    position: np.ndarray
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    gait_phase: np.ndarray
    gravity_tilt: np.ndarray
    foot_contacts: np.ndarray
    # newest action last; pending_actions[:, -1] is the previous action
    pending_actions: np.ndarray
    episode_step: np.ndarray

    @classmethod
    def zeros(cls, count, env_cfg, queue_length):
        joints = env_cfg["num_joints"]
        tilt = np.zeros((count, 3))
        tilt[:, 2] = -1.0
        state = cls(
            base_velocity=np.zeros((count, 2)),
            yaw_rate=np.zeros(count),
            heading=np.zeros(count),
            position=np.zeros((count, 2)),
            joint_pos=np.zeros((count, joints)),
            joint_vel=np.zeros((count, joints)),
            gait_phase=np.zeros(count),
            gravity_tilt=tilt,
            foot_contacts=np.zeros((count, env_cfg["num_feet"])),
            pending_actions=np.zeros((count, queue_length, joints)),
            episode_step=np.zeros(count, dtype=np.int64),
        )
        state.foot_contacts = foot_contacts(state.gait_phase, env_cfg["num_feet"])
        return state

    def copy(self):
        return RobotState(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def assign(self, index, other):
        for f in fields(self):
            getattr(self, f.name)[index] = getattr(other, f.name)

    def subset(self, index):
        return RobotState(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    @property
    def previous_action(self):
        return self.pending_actions[:, -1]


@dataclass
class ProprioObservation:
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    ang_vel: np.ndarray
    gravity_tilt: np.ndarray
    foot_contacts: np.ndarray
    command: np.ndarray

    def as_array(self):
        """
        o_t = [q, q_dot, omega, g, c, cmd], shape (N, m)
        """
        return np.concatenate(
            [
                self.joint_pos,
                self.joint_vel,
                self.ang_vel,
                self.gravity_tilt,
                self.foot_contacts,
                self.command,
            ],
            axis=1,
        )


@dataclass
class PrivilegeObservation:
    dynamics: np.ndarray
    true_state: np.ndarray
    terrain_samples: np.ndarray

    def as_array(self):
        """
        e_t = [d_t, s_t, m_t], shape (N, privilege_dim)
        """
        return np.concatenate(
            [self.dynamics, self.true_state, self.terrain_samples], axis=1
        )


@dataclass
class RewardInputs:
    lin_vel_cmd: np.ndarray
    lin_vel: np.ndarray
    ang_vel_cmd: np.ndarray
    ang_vel: np.ndarray
    vertical_vel: np.ndarray
    joint_acc: np.ndarray
    work: np.ndarray
    action: np.ndarray
    prev_action: np.ndarray
    foot_contacts: np.ndarray
    foot_velocity: np.ndarray
    collision: np.ndarray


def randomize_dynamics(rng, ranges, count=1):
    """
    Draw hidden dynamics parameters, each field independently and uniformly
    from its range.

    Arguments:
        rng {np.random.Generator} -- generator owned by the agent(s)
        ranges {dict} -- randomization section, name -> [low, high]
        count {int} -- number of draws

    Returns:
        DynamicsParams
    """
    for name, (low, high) in ranges.items():
        if not low <= high:
            raise ConfigurationError(
                "Inverted randomization range {}: [{}, {}]".format(name, low, high)
            )
    values = {}
    for name in DYNAMICS_FIELDS:
        low, high = ranges[name]
        values[name] = rng.uniform(low, high, size=count)
    low, high = ranges["push_velocity"]
    values["push_velocity"] = rng.uniform(low, high, size=(count, 2))
    return DynamicsParams(**values)


def heading_command(heading_des, heading, gain, cap):
    return np.clip(gain * utils.wrap_angle(heading_des - heading), -cap, cap)


def sample_command(rng, current_heading, cmd_cfg, heading_gain):
    """
    Sample a velocity command with a desired heading.

    Arguments:
        rng {np.random.Generator} -- generator owned by the agent(s)
        current_heading {np.ndarray} -- heading per agent in rad
        cmd_cfg {dict} -- commands section (lin_vel, heading, ang_vel_cap)
        heading_gain {float} -- k_head

    Returns:
        Command
    """
    current_heading = np.atleast_1d(np.asarray(current_heading, dtype=float))
    count = len(current_heading)
    low, high = cmd_cfg["lin_vel"]
    v_x = rng.uniform(low, high, size=count)
    v_y = rng.uniform(low, high, size=count)
    low, high = cmd_cfg["heading"]
    heading_des = rng.uniform(low, high, size=count)
    omega_z = heading_command(
        heading_des, current_heading, heading_gain, cmd_cfg["ang_vel_cap"]
    )
    return Command(v_x=v_x, v_y=v_y, omega_z=omega_z, heading_des=heading_des)


def foot_contacts(gait_phase, num_feet):
    offsets = 2.0 * np.pi * np.arange(num_feet) / num_feet
    return (np.cos(gait_phase[:, None] + offsets[None, :]) > 0.0).astype(float)


def observe_proprio(state, command, env_cfg):
    """
    Build o_t from the robot state and the command only.
    """
    if env_cfg["ang_vel_dims"] == 3:
        ang_vel = np.zeros((len(state.yaw_rate), 3))
        ang_vel[:, 2] = state.yaw_rate
    else:
        ang_vel = state.yaw_rate[:, None]
    return ProprioObservation(
        joint_pos=state.joint_pos.copy(),
        joint_vel=state.joint_vel.copy(),
        ang_vel=ang_vel,
        gravity_tilt=state.gravity_tilt.copy(),
        foot_contacts=state.foot_contacts.copy(),
        command=command.as_array(),
    )


def observe_privilege(state, params, terrain, env_cfg):
    true_state = np.concatenate([state.base_velocity, state.heading[:, None]], axis=1)
    samples = terrain.sample_line(
        state.position,
        state.heading,
        env_cfg["terrain_samples"],
        env_cfg["terrain_sample_spacing"],
    )
    return PrivilegeObservation(
        dynamics=params.as_array(),
        true_state=true_state,
        terrain_samples=samples,
    )


def draw_noise(rng, count, decimation):
    """
    Standard normal substep noise, drawn from each agent's own generator

    Arguments:
        rng {np.random.Generator or list} -- one generator, or one per agent
        count {int} -- number of agents
        decimation {int} -- substeps per control step
    """
    if isinstance(rng, np.random.Generator):
        return rng.standard_normal((count, decimation, NOISE_CHANNELS))
    return np.stack(
        [g.standard_normal((decimation, NOISE_CHANNELS)) for g in rng], axis=0
    )


def step(state, action, params, terrain, command, rng, env_cfg):
    """
    Advance one control step (decimation PD substeps).

    Arguments:
        state {RobotState} -- current state, not modified
        action {np.ndarray} -- target joint positions, (N, n)
        params {DynamicsParams} -- hidden dynamics
        terrain {TerrainBatch} -- terrain regime per agent
        command {Command} -- active command
        rng {np.random.Generator or list} -- generator(s) for roughness noise
        env_cfg {dict} -- env section of the configuration

    Returns:
        tuple -- (RobotState, ProprioObservation, PrivilegeObservation, RewardInputs, done)
    """
    dt = env_cfg["sim_dt"]
    decimation = env_cfg["decimation"]
    control_dt = dt * decimation
    count = len(state.heading)

    action = np.clip(
        np.asarray(action, dtype=float), -env_cfg["clip_actions"], env_cfg["clip_actions"]
    )
    noise = draw_noise(rng, count, decimation)

    new = state.copy()
    prev_action = state.previous_action.copy()
    new.pending_actions = np.concatenate(
        [state.pending_actions[:, 1:], action[:, None, :]], axis=1
    )
    queue_length = new.pending_actions.shape[1]
    delay = np.minimum(params.delay_steps(control_dt), queue_length - 1)
    applied = new.pending_actions[np.arange(count), queue_length - 1 - delay]

    kp = (params.kp_scale * env_cfg["kp"])[:, None]
    kd = (params.kd_scale * env_cfg["kd"])[:, None]
    tau_max = (params.motor_strength_scale * env_cfg["torque_limit"])[:, None]
    drive = np.asarray(env_cfg["drive_matrix"], dtype=float)
    mass = env_cfg["base_mass"] + params.payload_mass
    inertia = env_cfg["yaw_inertia"] + params.payload_mass * params.payload_com_offset**2
    lin_damping = env_cfg["linear_damping"] * params.friction_scale
    yaw_damping = env_cfg["yaw_damping"] * params.friction_scale
    noise_std = terrain.noise_std

    interval = int(round(env_cfg["push_interval_s"] / control_dt))
    push = (new.episode_step > 0) & (new.episode_step % interval == 0)

    old_position = new.position.copy()
    old_joint_vel = new.joint_vel.copy()
    work = np.zeros(count)

    for substep in range(decimation):
        if substep == 0:
            new.base_velocity = new.base_velocity + np.where(
                push[:, None],
                terrain.push_scale[:, None] * params.push_velocity,
                0.0,
            )
        torque = kp * utils.wrap_angle(applied - new.joint_pos) - kd * new.joint_vel
        torque = np.clip(torque, -tau_max, tau_max)
        new.joint_vel = new.joint_vel + torque * dt
        new.joint_pos = utils.wrap_angle(new.joint_pos + new.joint_vel * dt)
        work = work + np.abs(np.sum(torque * new.joint_vel, axis=1)) * dt

        force = params.motor_strength_scale[:, None] * (new.joint_vel @ drive.T)
        tilt = terrain.gravity_tilt(new.position, new.heading)
        lin_acc = (
            (force[:, :2] - lin_damping[:, None] * new.base_velocity) / mass[:, None]
            + params.gravity[:, None] * tilt[:, :2]
            + noise_std[:, None] * noise[:, substep, :2]
        )
        yaw_acc = (force[:, 2] - yaw_damping * new.yaw_rate) / inertia + noise_std * noise[
            :, substep, 2
        ]
        new.base_velocity = new.base_velocity + lin_acc * dt
        new.yaw_rate = new.yaw_rate + yaw_acc * dt
        new.heading = utils.wrap_angle(new.heading + new.yaw_rate * dt)

        cos_h = np.cos(new.heading)
        sin_h = np.sin(new.heading)
        world_vel = np.stack(
            [
                cos_h * new.base_velocity[:, 0] - sin_h * new.base_velocity[:, 1],
                sin_h * new.base_velocity[:, 0] + cos_h * new.base_velocity[:, 1],
            ],
            axis=1,
        )
        new.position = new.position + world_vel * dt
        speed = np.linalg.norm(new.base_velocity, axis=1)
        new.gait_phase = np.mod(
            new.gait_phase + env_cfg["gait_phase_gain"] * speed * dt, 2.0 * np.pi
        )

    new.episode_step = state.episode_step + 1

    finite = np.ones(count, dtype=bool)
    for f in fields(new):
        value = getattr(new, f.name)
        if value.dtype.kind == "f":
            finite &= np.all(np.isfinite(value.reshape(count, -1)), axis=1)
    if not np.all(finite):
        logger.warning(
            "Environment fault: non-finite state for {} agent(s), terminating".format(
                int((~finite).sum())
            )
        )
        for f in fields(new):
            value = getattr(new, f.name)
            if value.dtype.kind == "f":
                setattr(new, f.name, np.nan_to_num(value, nan=0.0, posinf=0.0, neginf=0.0))
        work = np.nan_to_num(work, nan=0.0, posinf=0.0, neginf=0.0)
        old_position = np.nan_to_num(old_position, nan=0.0, posinf=0.0, neginf=0.0)
        old_joint_vel = np.nan_to_num(old_joint_vel, nan=0.0, posinf=0.0, neginf=0.0)
        action = np.nan_to_num(action, nan=0.0, posinf=0.0, neginf=0.0)
        prev_action = np.nan_to_num(prev_action, nan=0.0, posinf=0.0, neginf=0.0)

    new.foot_contacts = foot_contacts(new.gait_phase, env_cfg["num_feet"])
    new.gravity_tilt = terrain.gravity_tilt(new.position, new.heading)

    vertical_vel = (
        terrain.height(new.position[:, 0], new.position[:, 1])
        - terrain.height(old_position[:, 0], old_position[:, 1])
    ) / control_dt
    joint_acc = (new.joint_vel - old_joint_vel) / control_dt

    speed = np.linalg.norm(new.base_velocity, axis=1)
    collision = (
        ~finite
        | (speed > env_cfg["crash_speed"])
        | np.any(np.abs(new.position) > env_cfg["arena_half_extent"], axis=1)
    )
    max_steps = int(round(env_cfg["episode_length_s"] / control_dt))
    timeout = new.episode_step >= max_steps
    done = collision | timeout

    reward_inputs = RewardInputs(
        lin_vel_cmd=np.stack([command.v_x, command.v_y], axis=1),
        lin_vel=new.base_velocity.copy(),
        ang_vel_cmd=command.omega_z.copy(),
        ang_vel=new.yaw_rate.copy(),
        vertical_vel=np.nan_to_num(vertical_vel),
        joint_acc=joint_acc,
        work=work,
        action=action,
        prev_action=prev_action,
        foot_contacts=new.foot_contacts.copy(),
        foot_velocity=np.repeat(new.base_velocity[:, None, :], env_cfg["num_feet"], axis=1),
        collision=collision,
    )
    proprio = observe_proprio(new, command, env_cfg)
    privilege = observe_privilege(new, params, terrain, env_cfg)
    return new, proprio, privilege, reward_inputs, done


if __name__ == "__main__":
    print("this is only a module")
