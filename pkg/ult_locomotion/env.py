#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Vectorized environment manager for X independent planar commander agents.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from . import dynamics, log, reward, terrain, utils

logger = log.setup_custom_logger("ult_locomotion")


@dataclass
class StepResult:
    proprio: np.ndarray
    privilege: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    timeout: np.ndarray
    collision: np.ndarray
    raw_terms: dict
    finished: list = field(default_factory=list)


class LocomotionEnv:
    """
    X agents, each with its own generator, dynamics draw, command, terrain
    regime and curriculum level. Finished agents are reset automatically;
    the observation returned for them is the first one of the new episode.
    """

    def __init__(
        self, env_cfg, num_agents, seed, regime_types=None, levels=None, fixed_levels=False
    ):
        """
        Arguments:
            env_cfg {dict} -- env section of the configuration
            num_agents {int} -- X
            seed {int} -- root seed for the per-agent generators

        Keyword Arguments:
            regime_types {np.ndarray} -- regime per agent (default: allocated by proportions)
            levels {np.ndarray} -- initial level per agent (default: drawn in [0, max_init_level])
            fixed_levels {bool} -- disable the curriculum (evaluation)
        """
        self.cfg = env_cfg
        self.num_agents = num_agents
        self.fixed_levels = fixed_levels
        self.control_dt = env_cfg["sim_dt"] * env_cfg["decimation"]
        self.max_episode_steps = int(round(env_cfg["episode_length_s"] / self.control_dt))
        self.command_period = int(round(env_cfg["command_resample_s"] / self.control_dt))
        self.queue_length = (
            int(round(env_cfg["randomization"]["system_delay"][1] / self.control_dt)) + 1
        )
        self.rngs = utils.spawn_generators(seed, num_agents)

        if regime_types is None:
            regime_types = terrain.allocate_regimes(
                num_agents, env_cfg["terrain"]["proportions"]
            )
        if levels is None:
            levels = np.array(
                [rng.integers(0, env_cfg["max_init_level"] + 1) for rng in self.rngs]
            )
        self.terrain = terrain.TerrainBatch.create(regime_types, levels, env_cfg["terrain"])

        self.state = dynamics.RobotState.zeros(num_agents, env_cfg, self.queue_length)
        self.params = dynamics.DynamicsParams.concatenate(
            [self._draw_params(i) for i in range(num_agents)]
        )
        self.command = dynamics.Command.concatenate(
            [self._draw_command(i) for i in range(num_agents)]
        )
        for i in range(num_agents):
            self.terrain.reseed_phases(i, self.rngs[i])

        self.episode_return = np.zeros(num_agents)
        self.episode_terms = {name: np.zeros(num_agents) for name in reward.REWARD_TERMS}
        self.episodes_finished = 0

    def _draw_params(self, agent):
        return dynamics.randomize_dynamics(self.rngs[agent], self.cfg["randomization"], 1)

    def _draw_command(self, agent):
        return dynamics.sample_command(
            self.rngs[agent],
            self.state.heading[agent : agent + 1],
            self.cfg["commands"],
            self.cfg["heading_gain"],
        )

    def observe(self):
        """
        Current (proprio, privilege) observation arrays
        """
        proprio = dynamics.observe_proprio(self.state, self.command, self.cfg)
        privilege = dynamics.observe_privilege(
            self.state, self.params, self.terrain, self.cfg
        )
        return proprio.as_array(), privilege.as_array()

    @property
    def levels(self):
        return self.terrain.levels

    def _reset_agents(self, agents):
        fresh = dynamics.RobotState.zeros(len(agents), self.cfg, self.queue_length)
        self.state.assign(agents, fresh)
        for agent in agents:
            self.params.assign([agent], self._draw_params(agent))
            self.command.assign([agent], self._draw_command(agent))
            self.terrain.reseed_phases(agent, self.rngs[agent])
        self.state.gravity_tilt[agents] = self.terrain.subset(agents).gravity_tilt(
            self.state.position[agents], self.state.heading[agents]
        )
        self.episode_return[agents] = 0.0
        for name in reward.REWARD_TERMS:
            self.episode_terms[name][agents] = 0.0

    def step(self, actions):
        """
        Apply one control step to every agent.

        Arguments:
            actions {np.ndarray} -- target joint positions, (X, n)

        Returns:
            StepResult
        """
        self.command.omega_z = dynamics.heading_command(
            self.command.heading_des,
            self.state.heading,
            self.cfg["heading_gain"],
            self.cfg["commands"]["ang_vel_cap"],
        )
        new_state, _, _, inputs, done = dynamics.step(
            self.state,
            actions,
            self.params,
            self.terrain,
            self.command,
            self.rngs,
            self.cfg,
        )
        self.state = new_state
        total, raw, _ = reward.compute_reward(
            inputs, self.cfg["reward_scales"], self.cfg["tracking_sharpness"]
        )
        self.episode_return += total
        for name in reward.REWARD_TERMS:
            self.episode_terms[name] += raw[name]

        collision = inputs.collision.copy()
        timeout = done & ~collision
        finished = []
        agents = np.flatnonzero(done)
        if len(agents):
            finished = self._finish_episodes(agents, collision)
            self._reset_agents(agents)

        resample = np.flatnonzero(
            ~done & (self.state.episode_step % self.command_period == 0)
        )
        for agent in resample:
            self.command.assign([agent], self._draw_command(agent))

        proprio, privilege = self.observe()
        return StepResult(
            proprio=proprio,
            privilege=privilege,
            reward=total,
            done=done,
            timeout=timeout,
            collision=collision,
            raw_terms=raw,
            finished=finished,
        )

    def _finish_episodes(self, agents, collision):
        finished = []
        for agent in agents:
            finished.append(
                {
                    "agent": int(agent),
                    "regime": terrain.REGIME_TYPES[self.terrain.types[agent]],
                    "level": int(self.terrain.levels[agent]),
                    "length": int(self.state.episode_step[agent]),
                    "return": float(self.episode_return[agent]),
                    "collision": bool(collision[agent]),
                    "terms": {
                        name: float(self.episode_terms[name][agent])
                        for name in reward.REWARD_TERMS
                    },
                }
            )
        self.episodes_finished += len(agents)
        if not self.fixed_levels:
            self.terrain.levels[agents] = terrain.curriculum_update(
                self.episode_terms["lin_vel_tracking"][agents],
                self.max_episode_steps,
                self.terrain.levels[agents],
                self.cfg["curriculum"],
                self.cfg["terrain"]["max_level"],
            )
        return finished

    def state_dict(self):
        """
        Everything needed to continue the environment bit-identically
        """
        arrays = {}
        for group, obj in [
            ("state", self.state),
            ("params", self.params),
            ("command", self.command),
        ]:
            for f in fields(obj):
                arrays["{}.{}".format(group, f.name)] = getattr(obj, f.name)
        arrays["terrain.types"] = self.terrain.types
        arrays["terrain.levels"] = self.terrain.levels
        arrays["terrain.phases"] = self.terrain.phases
        arrays["episode.return"] = self.episode_return
        for name in reward.REWARD_TERMS:
            arrays["episode.{}".format(name)] = self.episode_terms[name]
        return {
            "arrays": {k: np.array(v, copy=True) for k, v in arrays.items()},
            "rngs": [utils.generator_state(rng) for rng in self.rngs],
            "episodes_finished": self.episodes_finished,
        }

    def load_state_dict(self, state):
        arrays = state["arrays"]
        for group, obj in [
            ("state", self.state),
            ("params", self.params),
            ("command", self.command),
        ]:
            for f in fields(obj):
                setattr(obj, f.name, np.array(arrays["{}.{}".format(group, f.name)]))
        self.terrain.types = np.array(arrays["terrain.types"])
        self.terrain.levels = np.array(arrays["terrain.levels"])
        self.terrain.phases = np.array(arrays["terrain.phases"])
        self.episode_return = np.array(arrays["episode.return"])
        for name in reward.REWARD_TERMS:
            self.episode_terms[name] = np.array(arrays["episode.{}".format(name)])
        self.rngs = [utils.restore_generator(s) for s in state["rngs"]]
        self.episodes_finished = state["episodes_finished"]


if __name__ == "__main__":
    print("this is only a module")
