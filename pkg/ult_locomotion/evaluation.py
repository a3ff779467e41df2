#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Evaluation harness and normalization against the oracle.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from . import log, terrain, utils
from .env import LocomotionEnv
from .errors import ReportError, UsageError
from .trajectorywindow import TrajectoryWindow

logger = log.setup_custom_logger("ult_locomotion")

METRICS = ["lin_track", "ang_track", "episode_return"]
REPORT_COLUMNS = ["scheme", "head", "alpha", "seed", "regime", "metric", "value"]
AVERAGE = "average"


@dataclass
class EvalMetrics:
    lin_track: float
    ang_track: float
    episode_return: float
    survival: float
    episodes: int
    per_regime: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "lin_track": self.lin_track,
            "ang_track": self.ang_track,
            "episode_return": self.episode_return,
            "survival": self.survival,
            "episodes": self.episodes,
            "per_regime": self.per_regime,
        }


def summarize(episodes):
    """
    Aggregate finished-episode records into metric means.

    Arguments:
        episodes {list} -- records as produced by LocomotionEnv

    Returns:
        dict -- lin_track, ang_track, episode_return, survival, episodes
    """
    if not episodes:
        return {
            "lin_track": 0.0,
            "ang_track": 0.0,
            "episode_return": 0.0,
            "survival": 0.0,
            "episodes": 0,
        }
    lin = [e["terms"]["lin_vel_tracking"] / e["length"] for e in episodes]
    ang = [e["terms"]["ang_vel_tracking"] / e["length"] for e in episodes]
    returns = [e["return"] for e in episodes]
    survived = [0.0 if e["collision"] else 1.0 for e in episodes]
    return {
        "lin_track": float(np.mean(lin)),
        "ang_track": float(np.mean(ang)),
        "episode_return": float(np.mean(returns)),
        "survival": float(np.mean(survived)),
        "episodes": len(episodes),
    }


def evaluation_suite(count, env_cfg):
    """
    Regime type and level per evaluation agent: types follow the regime
    proportions, levels cycle through 0 .. max_level within each type.
    """
    types = terrain.allocate_regimes(count, env_cfg["terrain"]["proportions"])
    levels = np.zeros(count, dtype=np.int64)
    for regime in range(len(terrain.REGIME_TYPES)):
        members = np.flatnonzero(types == regime)
        levels[members] = np.arange(len(members)) % (env_cfg["terrain"]["max_level"] + 1)
    return types, levels


def policy_actions(policy, tokens, lengths, privilege, head):
    if head == "student":
        return policy.act(tokens, lengths, mode="deploy").actions
    with torch.no_grad():
        outputs = policy.evaluate(tokens, lengths, privilege)
    if outputs.teacher_mean is None:
        raise UsageError("Policy has no teacher head to evaluate")
    return outputs.teacher_mean.double().numpy()


def evaluate(policy, env_cfg, episodes=500, seed=12345, head="student", step_log=None):
    """
    Roll one episode per evaluation agent and aggregate.

    Arguments:
        policy {PolicyBase} -- model to evaluate (not modified)
        env_cfg {dict} -- env section of the configuration
        episodes {int} -- number of episodes (one agent each)
        seed {int} -- evaluation seed
        head {str} -- "student" runs the deploy path without privilege,
                      "teacher" feeds privilege and uses the teacher mean
        step_log {list} -- if given, receives one dict per (agent, step) of the first episodes

    Returns:
        EvalMetrics
    """
    if head not in ("student", "teacher"):
        raise UsageError("Unknown evaluation head: {}".format(head))
    if head == "student" and not policy.deployable:
        raise UsageError("A {} model has no deployable student".format(policy.kind))
    policy.eval()
    types, levels = evaluation_suite(episodes, env_cfg)
    env = LocomotionEnv(
        env_cfg, episodes, seed, regime_types=types, levels=levels, fixed_levels=True
    )
    config = policy.config
    window = TrajectoryWindow(episodes, config.obs_dim, config.action_dim, config.window)
    proprio, privilege = env.observe()
    window.start_episode(proprio)

    records = [None] * episodes
    running = np.ones(episodes, dtype=bool)
    while running.any():
        tokens, lengths = window.snapshot()
        actions = policy_actions(
            policy, tokens, lengths, privilege if head == "teacher" else None, head
        )
        step = env.step(actions)
        if step_log is not None:
            for agent in np.flatnonzero(running):
                step_log.append(
                    {
                        "agent": int(agent),
                        "lin_vel_tracking": float(step.raw_terms["lin_vel_tracking"][agent]),
                        "ang_vel_tracking": float(step.raw_terms["ang_vel_tracking"][agent]),
                        "reward": float(step.reward[agent]),
                        "done": bool(step.done[agent]),
                        "collision": bool(step.collision[agent]),
                    }
                )
        for record in step.finished:
            agent = record["agent"]
            if running[agent]:
                records[agent] = record
                running[agent] = False

        alive = np.flatnonzero(~step.done)
        ended = np.flatnonzero(step.done)
        if len(alive):
            window.push_step(step.proprio[alive], actions[alive], alive)
        if len(ended):
            window.start_episode(step.proprio[ended], ended)
        privilege = step.privilege

    overall = summarize(records)
    per_regime = {}
    for regime in terrain.REGIME_TYPES:
        per_regime[regime] = summarize([r for r in records if r["regime"] == regime])
    metrics = EvalMetrics(per_regime=per_regime, **overall)
    logger.info(
        "Evaluated {} head over {} episodes: lin {:.4f} ang {:.4f} return {:.4f} survival {:.3f}".format(
            head,
            metrics.episodes,
            metrics.lin_track,
            metrics.ang_track,
            metrics.episode_return,
            metrics.survival,
        )
    )
    return metrics


@dataclass
class NormalizedReport:
    scheme: str
    head: str
    alpha: float
    seed: int
    rows: dict

    def to_rows(self):
        out = []
        for regime, values in self.rows.items():
            for metric in METRICS:
                out.append(
                    {
                        "scheme": self.scheme,
                        "head": self.head,
                        "alpha": self.alpha,
                        "seed": self.seed,
                        "regime": regime,
                        "metric": metric,
                        "value": values[metric],
                    }
                )
        return out

    def value(self, metric, regime=AVERAGE):
        return self.rows[regime][metric]


def _ratio(value, reference, where):
    if reference == 0:
        logger.warning("Zero oracle reference for {}, ratio undefined".format(where))
        return float("nan")
    return value / reference


def normalize(metrics, oracle_metrics, scheme="ult", head="student", alpha=float("nan"), seed=0):
    """
    Divide per-regime metrics by the oracle's and add the average row.

    Arguments:
        metrics {EvalMetrics or dict} -- per_regime metrics (or the per_regime dict itself)
        oracle_metrics {EvalMetrics or dict} -- oracle reference, same regimes

    Returns:
        NormalizedReport
    """
    ours = metrics.per_regime if isinstance(metrics, EvalMetrics) else metrics
    reference = (
        oracle_metrics.per_regime
        if isinstance(oracle_metrics, EvalMetrics)
        else oracle_metrics
    )
    rows = {}
    for regime in terrain.REGIME_TYPES:
        if regime not in ours or regime not in reference:
            raise ReportError("Missing regime {} in normalization input".format(regime))
        rows[regime] = {
            metric: _ratio(
                ours[regime][metric], reference[regime][metric], "{}/{}".format(regime, metric)
            )
            for metric in METRICS
        }
    rows[AVERAGE] = {
        metric: float(np.mean([rows[r][metric] for r in terrain.REGIME_TYPES]))
        for metric in METRICS
    }
    return NormalizedReport(scheme=scheme, head=head, alpha=alpha, seed=seed, rows=rows)


def write_regime_metrics(path, metrics):
    """
    One row per (regime, metric), the format used for oracle references
    """
    rows = []
    for regime in terrain.REGIME_TYPES:
        for metric in METRICS + ["survival"]:
            rows.append(
                {"regime": regime, "metric": metric, "value": metrics.per_regime[regime][metric]}
            )
    utils.write_csv(path, ["regime", "metric", "value"], rows)


def read_regime_metrics(path):
    per_regime = {}
    for row in utils.read_csv(path):
        per_regime.setdefault(row["regime"], {})[row["metric"]] = float(row["value"])
    missing = [r for r in terrain.REGIME_TYPES if r not in per_regime]
    if missing:
        raise ReportError("Regime metrics {} lack regimes {}".format(path, missing))
    return per_regime


def write_report(path, reports):
    """
    CSV with one row per (scheme, head, alpha, seed, regime, metric)
    """
    rows = []
    for report in reports:
        rows += report.to_rows()
    utils.write_csv(path, REPORT_COLUMNS, rows)


def report_summary(reports):
    """
    Average rows of each report, keyed for JSON output
    """
    summary = []
    for report in reports:
        entry = {
            "scheme": report.scheme,
            "head": report.head,
            "alpha": None if math.isnan(report.alpha) else report.alpha,
            "seed": report.seed,
        }
        entry.update(report.rows[AVERAGE])
        summary.append(entry)
    return summary


if __name__ == "__main__":
    print("this is only a module")
