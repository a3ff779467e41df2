#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Terrain regimes and the level curriculum.

Each agent lives on one of five analytic height fields (smooth slope, rough
slope, stairs up, stairs down, discrete obstacles). The curriculum level
(0 .. max_level) scales the difficulty knobs of the regime linearly.
"""

from dataclasses import dataclass

import numpy as np

from . import log
from .config import REGIME_TYPES

logger = log.setup_custom_logger("ult_locomotion")

SMOOTH_SLOPE, ROUGH_SLOPE, STAIRS_UP, STAIRS_DOWN, DISCRETE = range(len(REGIME_TYPES))

GRADIENT_EPS = 1e-4


def allocate_regimes(count, proportions):
    """
    Deterministically assign regime types to `count` agents in contiguous
    blocks following the proportions.

    Arguments:
        count {int} -- number of agents
        proportions {list} -- sampling proportion per regime type

    Returns:
        np.ndarray -- regime type index per agent
    """
    bounds = np.cumsum(proportions)
    positions = (np.arange(count) + 0.5) / count
    types = np.searchsorted(bounds, positions, side="right")
    return np.minimum(types, len(proportions) - 1).astype(np.int64)


@dataclass
class TerrainBatch:
    """
    Per-agent terrain regime: type, level and random phases of the periodic
    features, plus the terrain section of the environment config.
    """

    types: np.ndarray
    levels: np.ndarray
    phases: np.ndarray
    cfg: dict

    @classmethod
    def create(cls, types, levels, cfg):
        count = len(types)
        return cls(
            types=np.asarray(types, dtype=np.int64),
            levels=np.asarray(levels, dtype=np.int64),
            phases=np.zeros((count, 4)),
            cfg=cfg,
        )

    def subset(self, index):
        return TerrainBatch(
            types=self.types[index],
            levels=self.levels[index],
            phases=self.phases[index],
            cfg=self.cfg,
        )

    def reseed_phases(self, agent, rng):
        self.phases[agent] = rng.uniform(0.0, 2.0 * np.pi, size=4)

    @property
    def difficulty(self):
        return self.levels / float(self.cfg["max_level"])

    @property
    def slope(self):
        on_slope = (self.types == SMOOTH_SLOPE) | (self.types == ROUGH_SLOPE)
        return np.where(on_slope, self.cfg["max_slope"] * self.difficulty, 0.0)

    @property
    def roughness(self):
        return np.where(
            self.types == ROUGH_SLOPE, self.cfg["max_roughness"] * self.difficulty, 0.0
        )

    @property
    def step_height(self):
        sign = np.where(
            self.types == STAIRS_UP, 1.0, np.where(self.types == STAIRS_DOWN, -1.0, 0.0)
        )
        return sign * self.cfg["max_step_height"] * self.difficulty

    @property
    def obstacle_height(self):
        return np.where(
            self.types == DISCRETE, self.cfg["max_obstacle_height"] * self.difficulty, 0.0
        )

    @property
    def push_scale(self):
        return self.cfg["max_push_scale"] * self.difficulty

    @property
    def noise_std(self):
        return self.roughness * self.cfg["roughness_noise_gain"]

    def height(self, x, y):
        """
        Terrain height at world coordinates. x and y are (N,) or (N, K).
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        extra = (slice(None),) + (None,) * (x.ndim - 1)

        k_rough = 2.0 * np.pi / self.cfg["roughness_wavelength"]
        k_obst = 2.0 * np.pi / self.cfg["obstacle_wavelength"]
        width = self.cfg["step_width"]
        p = [self.phases[:, i][extra] for i in range(4)]

        h = self.slope[extra] * x
        h = h + self.roughness[extra] * np.sin(k_rough * x + p[0]) * np.sin(
            k_rough * y + p[1]
        )
        # smooth staircase: flat treads at multiples of the step width
        h = h + self.step_height[extra] * (
            x / width - np.sin(2.0 * np.pi * x / width) / (2.0 * np.pi)
        )
        h = h + self.obstacle_height[extra] * (
            np.sin(k_obst * x + p[2]) * np.sin(k_obst * y + p[3])
        ) ** 2
        return h

    def gradient(self, x, y):
        """
        Central-difference gradient (dh/dx, dh/dy) in world coordinates
        """
        gx = (self.height(x + GRADIENT_EPS, y) - self.height(x - GRADIENT_EPS, y)) / (
            2.0 * GRADIENT_EPS
        )
        gy = (self.height(x, y + GRADIENT_EPS) - self.height(x, y - GRADIENT_EPS)) / (
            2.0 * GRADIENT_EPS
        )
        return gx, gy

    def gravity_tilt(self, position, heading):
        """
        Unit gravity direction in the body frame for a base resting on the
        local terrain plane; (0, 0, -1) on flat ground.
        """
        gx, gy = self.gradient(position[:, 0], position[:, 1])
        cos_h = np.cos(heading)
        sin_h = np.sin(heading)
        gx_body = cos_h * gx + sin_h * gy
        gy_body = -sin_h * gx + cos_h * gy
        tilt = np.stack([-gx_body, -gy_body, -np.ones_like(gx_body)], axis=1)
        return tilt / np.linalg.norm(tilt, axis=1, keepdims=True)

    def sample_line(self, position, heading, count, spacing):
        """
        Heights on a line ahead of the base, relative to the height under it
        """
        offsets = spacing * np.arange(1, count + 1)
        xs = position[:, 0:1] + np.cos(heading)[:, None] * offsets[None, :]
        ys = position[:, 1:2] + np.sin(heading)[:, None] * offsets[None, :]
        base = self.height(position[:, 0], position[:, 1])
        return self.height(xs, ys) - base[:, None]


def curriculum_update(tracking_return, max_return, level, cfg, max_level):
    """
    Move curriculum levels after finished episodes.

    Arguments:
        tracking_return {np.ndarray} -- accumulated linear tracking return per agent
        max_return {float} -- maximum achievable tracking return of one episode
        level {np.ndarray} -- current levels
        cfg {dict} -- curriculum section (promote_fraction, demote_fraction)
        max_level {int} -- highest level

    Returns:
        np.ndarray -- new levels, moved by at most one
    """
    fraction = np.asarray(tracking_return, dtype=float) / float(max_return)
    level = np.asarray(level, dtype=np.int64)
    promote = fraction >= cfg["promote_fraction"]
    demote = fraction < cfg["demote_fraction"]
    new_level = level + promote.astype(np.int64) - demote.astype(np.int64)
    new_level = np.clip(new_level, 0, max_level)
    logger.debug(
        "Curriculum: {} promoted, {} demoted".format(
            int(promote.sum()), int(demote.sum())
        )
    )
    return new_level


if __name__ == "__main__":
    print("this is only a module")
