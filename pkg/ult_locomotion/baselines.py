#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Comparison ladder: the privileged oracle, supervised distillation from it
(offline, online, two-stage), joint RL + imitation transfer, vanilla PPO
and post-hoc transfer inside a unified transformer trained at alpha = 1.
"""

import copy
import math
import os

import numpy as np
import torch

from . import checkpoint, evaluation, log, utils
from .config import with_overrides
from .env import LocomotionEnv
from .errors import UsageError
from .losses import imitation_loss
from .network import NetConfig, OraclePolicy, ULTNet
from .trainer import METRIC_COLUMNS, TrainConfig, UnifiedTrainer, derive_seeds, train
from .trajectorywindow import TrajectoryWindow

logger = log.setup_custom_logger("ult_locomotion")

SCHEMES = ["oracle", "offline", "online", "two-stage", "joint", "ppo", "post-hoc"]

SOURCE_TEACHER = 0
SOURCE_STUDENT = 1


def oracle_config(cfg):
    return with_overrides(
        cfg,
        {
            "net": {"use_teacher": True, "value_from_privilege": True},
            "mixer": {"alpha": 1.0},
            "losses": {"ult_weight": 0.0},
        },
    )


def ppo_config(cfg):
    """
    Student-only PPO: no teacher, value on the last proprio output, no mixer
    and no transformer terms
    """
    return with_overrides(
        cfg,
        {
            "net": {"use_teacher": False, "value_from_privilege": False},
            "mixer": {"alpha": 0.0},
            "losses": {"ult_weight": 0.0},
        },
    )


def student_net_config(cfg):
    values = dict(cfg["net"], use_teacher=False, value_from_privilege=False)
    return NetConfig.from_dict(values)


def build_oracle(cfg):
    return OraclePolicy(
        NetConfig.from_dict(cfg["net"]),
        cfg["baselines"]["oracle_hidden"],
        cfg["baselines"]["critic_hidden"],
    )


def build_student(cfg):
    """
    The transformer without any privileged path, used by every supervised scheme
    """
    return ULTNet(student_net_config(cfg), deploy=True)


def oracle_budget(cfg):
    """
    Environment steps the oracle consumes during its own training
    """
    train_cfg = cfg["train"]
    return train_cfg["total_updates"] * train_cfg["horizon"] * train_cfg["num_agents"]


def _budget(value, cfg, key):
    if value is None:
        value = cfg["baselines"][key]
    return oracle_budget(cfg) if value is None else int(value)


def write_summary(out_dir, scheme, env_steps, oracle_steps=0, extra=None):
    """
    Trajectory accounting: steps of the scheme itself plus the oracle steps it builds on
    """
    if out_dir is None:
        return
    summary = {
        "scheme": scheme,
        "env_steps": int(env_steps),
        "oracle_env_steps": int(oracle_steps),
        "total_env_steps": int(env_steps + oracle_steps),
    }
    summary.update(extra or {})
    utils.write_json(summary, os.path.join(out_dir, "summary.json"))


def train_oracle(cfg, out_dir, env_factory=LocomotionEnv):
    """
    Train the privileged feed-forward policy with the unified PPO loop and
    persist its per-regime metrics as the normalization reference.

    Returns:
        tuple -- (OraclePolicy, EvalMetrics)
    """
    oracle_cfg = oracle_config(cfg)
    trainer, _ = train(
        oracle_cfg, out_dir, env_factory=env_factory, model=build_oracle(oracle_cfg), scheme="oracle"
    )
    oracle = trainer.model
    metrics = evaluation.evaluate(
        oracle, cfg["env"], cfg["eval"]["episodes"], cfg["eval"]["seed"], head="teacher"
    )
    if out_dir is not None:
        evaluation.write_regime_metrics(os.path.join(out_dir, "oracle_metrics.csv"), metrics)
        write_summary(out_dir, "oracle", trainer.env_steps)
    return oracle, metrics


class DistillDataset:
    """
    Ring buffer of windows with the oracle's mean action as label. The
    privileged observation is kept for inspection only; students never read it.
    """

    def __init__(self, capacity, window, token_dim, action_dim, privilege_dim):
        self.capacity = capacity
        self.tokens = np.zeros((capacity, window, token_dim))
        self.lengths = np.ones(capacity, dtype=np.int64)
        self.privilege = np.zeros((capacity, privilege_dim))
        self.labels = np.zeros((capacity, action_dim))
        self.sources = np.zeros(capacity, dtype=np.int8)
        self.size = 0
        self.cursor = 0

    def __len__(self):
        return self.size

    def add(self, tokens, lengths, privilege, labels, source):
        count = len(labels)
        if count > self.capacity:
            keep = slice(count - self.capacity, count)
            tokens, lengths, privilege, labels = (
                tokens[keep],
                lengths[keep],
                privilege[keep],
                labels[keep],
            )
            count = self.capacity
        idx = (self.cursor + np.arange(count)) % self.capacity
        self.tokens[idx] = tokens
        self.lengths[idx] = lengths
        self.privilege[idx] = privilege
        self.labels[idx] = labels
        self.sources[idx] = source
        self.cursor = int((self.cursor + count) % self.capacity)
        self.size = min(self.size + count, self.capacity)

    def source_fraction(self, source):
        if self.size == 0:
            return 0.0
        return float(np.mean(self.sources[: self.size] == source))

    def batches(self, batch_size, rng):
        order = rng.permutation(self.size)
        for start in range(0, self.size, batch_size):
            yield order[start : start + batch_size]


class Distiller:
    """
    Supervised transfer from a labeling policy to a deploy-path student.

    The labeler is queried with privilege for its teacher mean; the student
    only ever acts through its deploy path. Offline collection lets the
    labeler drive the environment, online collection (DAgger) lets the
    student drive it.
    """

    def __init__(
        self,
        cfg,
        student,
        labeler,
        out_dir=None,
        scheme="online",
        parameters=None,
        update_normalizer=True,
        env_factory=LocomotionEnv,
    ):
        self.cfg = cfg
        self.student = student
        self.labeler = labeler
        self.scheme = scheme
        self.update_normalizer = update_normalizer
        self.train_config = TrainConfig.from_config(cfg["train"])
        self.baseline_config = cfg["baselines"]
        tc = self.train_config
        net = student.config

        env_seed, _, _, shuffle_seed, _ = derive_seeds(tc.seed, 5)
        self.env = env_factory(cfg["env"], tc.num_agents, env_seed)
        self.window = TrajectoryWindow(tc.num_agents, net.obs_dim, net.action_dim, net.window)
        self.shuffle_rng = np.random.default_rng(shuffle_seed)
        self.dataset = DistillDataset(
            self.baseline_config["dataset_capacity"],
            net.window,
            net.token_dim,
            net.action_dim,
            net.privilege_dim,
        )
        if parameters is None:
            parameters = list(student.parameters())
        self.parameters = list(parameters)
        self.learning_rate = self.baseline_config["distill_learning_rate"]
        self.optimizer = torch.optim.AdamW(
            self.parameters, lr=self.learning_rate, weight_decay=tc.weight_decay
        )
        self.env_steps = 0
        self.iteration = 0
        self.action_gaps = []
        self.epoch_losses = []
        self._initial_seen = False

        self.labeler.eval()
        proprio, self.privilege = self.env.observe()
        self._initial_proprio = proprio
        self.window.start_episode(proprio)

        self.metrics_file = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            self.metrics_file = os.path.join(out_dir, "metrics.csv")

    @torch.no_grad()
    def label(self, tokens, lengths, privilege):
        outputs = self.labeler.evaluate(tokens, lengths, privilege)
        return outputs.teacher_mean.double().numpy()

    def collect(self, steps, actor):
        """
        Roll at least `steps` environment steps with the labeler or the
        student acting, storing every visited window with its label.

        Returns:
            dict -- collection statistics (action_gap is NaN for labeler rollouts)
        """
        num_agents = self.train_config.num_agents
        control_steps = int(math.ceil(steps / float(num_agents)))
        source = SOURCE_TEACHER if actor == "teacher" else SOURCE_STUDENT
        if self.update_normalizer and not self._initial_seen and control_steps > 0:
            self.student.normalizer.update(self._initial_proprio)
            self._initial_seen = True

        reward_sum = lin_sum = ang_sum = gap_sum = 0.0
        self.student.eval()
        for _ in range(control_steps):
            tokens, lengths = self.window.snapshot()
            labels = self.label(tokens, lengths, self.privilege)
            if actor == "teacher":
                actions = labels
            else:
                actions = self.student.act(tokens, lengths, mode="deploy").actions
                gap_sum += float(np.mean(np.sum((actions - labels) ** 2, axis=-1)))
            self.dataset.add(tokens, lengths, self.privilege, labels, source)
            step = self.env.step(actions)

            alive = np.flatnonzero(~step.done)
            ended = np.flatnonzero(step.done)
            if len(alive):
                self.window.push_step(step.proprio[alive], actions[alive], alive)
            if len(ended):
                self.window.start_episode(step.proprio[ended], ended)
            if self.update_normalizer:
                self.student.normalizer.update(step.proprio)
            self.privilege = step.privilege

            reward_sum += float(step.reward.mean())
            lin_sum += float(step.raw_terms["lin_vel_tracking"].mean())
            ang_sum += float(step.raw_terms["ang_vel_tracking"].mean())
        self.env_steps += control_steps * num_agents
        denominator = max(control_steps, 1)
        return {
            "mean_reward": reward_sum / denominator,
            "lin_track": lin_sum / denominator,
            "ang_track": ang_sum / denominator,
            "teacher_fraction": 1.0 if actor == "teacher" else 0.0,
            "action_gap": gap_sum / control_steps
            if actor != "teacher" and control_steps
            else float("nan"),
        }

    def fit(self, epochs):
        """
        Regress the stored labels; returns the average loss of every epoch
        """
        if len(self.dataset) == 0:
            return []
        batch_size = self.baseline_config["distill_minibatch"]
        data = self.dataset
        self.student.train()
        averages = []
        for _ in range(epochs):
            total = 0.0
            batches = 0
            for idx in data.batches(batch_size, self.shuffle_rng):
                outputs = self.student.evaluate(data.tokens[idx], data.lengths[idx])
                labels = self.student.as_tensor(data.labels[idx])
                loss = imitation_loss(labels, outputs.student_mean)
                self.optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(self.parameters, self.train_config.max_grad_norm)
                self.optimizer.step()
                total += float(loss.detach())
                batches += 1
            averages.append(total / batches)
            logger.debug("{} epoch loss {:.6f}".format(self.scheme, averages[-1]))
        self.student.eval()
        self.epoch_losses += averages
        return averages

    def write_row(self, stats, losses, scheme=None):
        self.iteration += 1
        row = {
            "update": self.iteration,
            "env_steps": self.env_steps,
            "mean_reward": stats.get("mean_reward", ""),
            "lin_track": stats.get("lin_track", ""),
            "ang_track": stats.get("ang_track", ""),
            "L_a": losses[-1] if losses else "",
            "lr": self.learning_rate,
            "mean_curriculum_level": float(np.mean(self.env.levels)),
            "teacher_fraction": stats.get("teacher_fraction", ""),
            "scheme": self.scheme if scheme is None else scheme,
        }
        if self.metrics_file is not None:
            utils.append_csv_row(self.metrics_file, METRIC_COLUMNS, row)
        return row

    def mark_phase(self, name):
        """
        Marker row at a phase boundary
        """
        logger.info("{}: entering {} phase at {} env steps".format(self.scheme, name, self.env_steps))
        return self.write_row({}, [], scheme="{}:{}".format(self.scheme, name))

    def run_offline(self, budget):
        """
        Labeler rollouts first, then regression on the frozen dataset
        """
        if budget <= 0:
            return []
        stats = self.collect(budget, "teacher")
        losses = self.fit(self.baseline_config["distill_epochs"])
        self.write_row(stats, losses)
        logger.info(
            "{}: offline dataset of {} windows, final loss {:.6f}".format(
                self.scheme, len(self.dataset), losses[-1]
            )
        )
        return losses

    def run_online(self, budget):
        """
        DAgger iterations: the student acts, the labeler labels, the student
        regresses the aggregated dataset
        """
        iteration_steps = self.baseline_config["dagger_iteration_steps"]
        if iteration_steps is None:
            iteration_steps = self.train_config.horizon * self.train_config.num_agents
        remaining = budget
        while remaining > 0:
            before = self.env_steps
            stats = self.collect(min(iteration_steps, remaining), "student")
            remaining -= self.env_steps - before
            losses = self.fit(self.baseline_config["distill_epochs"])
            self.action_gaps.append(stats["action_gap"])
            self.write_row(stats, losses)
            logger.info(
                "{}: iteration {} | gap {:.6f} | loss {:.6f} | {} env steps".format(
                    self.scheme, self.iteration, stats["action_gap"], losses[-1], self.env_steps
                )
            )
        return self.action_gaps


def distill_offline(oracle, student, cfg, budget=None, out_dir=None, env_factory=LocomotionEnv):
    """
    Offline-only distillation: the oracle generates every trajectory.

    Returns:
        Distiller -- holds the trained student, its dataset and statistics
    """
    distiller = Distiller(cfg, student, oracle, out_dir, "offline", env_factory=env_factory)
    distiller.run_offline(_budget(budget, cfg, "offline_budget"))
    return distiller


def distill_online(oracle, student, cfg, budget=None, out_dir=None, env_factory=LocomotionEnv):
    """
    Online-only distillation (DAgger): the student generates every trajectory.
    """
    distiller = Distiller(cfg, student, oracle, out_dir, "online", env_factory=env_factory)
    distiller.run_online(_budget(budget, cfg, "online_budget"))
    return distiller


def distill_two_stage(oracle, student, cfg, budgets=(None, None), out_dir=None, env_factory=LocomotionEnv):
    """
    Offline pre-training followed by online correction, with separate budgets.
    """
    offline, online = budgets
    offline = _budget(offline, cfg, "offline_budget")
    online = _budget(online, cfg, "online_budget")
    distiller = Distiller(cfg, student, oracle, out_dir, "two-stage", env_factory=env_factory)
    distiller.mark_phase("offline")
    distiller.run_offline(offline)
    distiller.mark_phase("online")
    distiller.run_online(online)
    return distiller


def joint_weight(update, total_updates, initial_weight=1.0):
    """
    Imitation weight of the joint scheme: linear from initial_weight at
    update 0 down to 0 at total_updates / 2, zero afterwards
    """
    midpoint = total_updates / 2.0
    if midpoint <= 0 or update >= midpoint:
        return 0.0
    return initial_weight * (1.0 - update / midpoint)


class JointTrainer(UnifiedTrainer):
    """
    Student PPO plus an annealed imitation term towards the oracle's mean action
    """

    scheme = "joint"

    def __init__(self, cfg, out_dir, oracle, env_factory=LocomotionEnv):
        self.oracle = oracle
        self.oracle.eval()
        self.initial_weight = cfg["baselines"]["joint_initial_weight"]
        super().__init__(ppo_config(cfg), out_dir, env_factory=env_factory)

    def imitation_weight(self):
        return joint_weight(self.update, self.train_config.total_updates, self.initial_weight)

    @torch.no_grad()
    def label_actions(self, tokens, lengths, privilege):
        if self.imitation_weight() == 0.0:
            return None
        return self.oracle.evaluate(tokens, lengths, privilege).teacher_mean.double().numpy()

    def extra_loss(self, outputs, minibatch):
        weight = self.imitation_weight()
        if weight == 0.0 or "labels" not in minibatch:
            return None
        return weight * imitation_loss(minibatch["labels"], outputs.student_mean)


def train_joint(oracle, cfg, out_dir, env_factory=LocomotionEnv):
    """
    Returns:
        JointTrainer -- after training (student in trainer.model)
    """
    trainer = JointTrainer(cfg, out_dir, oracle, env_factory=env_factory)
    trainer.train()
    return trainer


def train_ppo(cfg, out_dir, env_factory=LocomotionEnv):
    trainer, _ = train(ppo_config(cfg), out_dir, env_factory=env_factory, scheme="ppo")
    return trainer


def post_hoc_transfer(model, cfg, budget=None, out_dir=None, episodes=None, seed=None, env_factory=LocomotionEnv):
    """
    Online transfer inside a unified model trained at alpha = 1: the student
    acts and imitates a frozen copy of the model's own teacher. Only the
    student path is optimized.

    Arguments:
        model {ULTNet} -- full unified model (modified in place)
        cfg {dict} -- configuration

    Returns:
        tuple -- (Distiller, metrics before, metrics after)
    """
    if not isinstance(model, ULTNet) or model.teacher_head is None:
        raise UsageError("Post-hoc transfer needs a full unified model with a teacher head")
    episodes = cfg["eval"]["episodes"] if episodes is None else episodes
    seed = cfg["eval"]["seed"] if seed is None else seed
    budget = _budget(budget, cfg, "post_hoc_budget")

    before = evaluation.evaluate(model, cfg["env"], episodes, seed, head="student")
    frozen = copy.deepcopy(model)
    distiller = Distiller(
        cfg,
        model,
        frozen,
        out_dir,
        "post-hoc",
        parameters=model.student_parameters(),
        update_normalizer=False,
        env_factory=env_factory,
    )
    distiller.mark_phase("online")
    distiller.run_online(budget)
    after = evaluation.evaluate(model, cfg["env"], episodes, seed, head="student")
    logger.info(
        "post-hoc transfer: student return {:.4f} -> {:.4f}".format(
            before.episode_return, after.episode_return
        )
    )
    return distiller, before, after


def _load_oracle(cfg, out_dir, oracle_checkpoint, env_factory):
    if oracle_checkpoint is not None:
        oracle, header = checkpoint.load_model(oracle_checkpoint, cfg["net"])
        if oracle.kind != "oracle":
            raise UsageError("{} is not an oracle checkpoint".format(oracle_checkpoint))
        return oracle, header["metadata"].get("env_steps", 0)
    oracle_dir = None if out_dir is None else os.path.join(out_dir, "oracle")
    oracle, _ = train_oracle(cfg, oracle_dir, env_factory=env_factory)
    return oracle, oracle_budget(cfg)


def run_scheme(scheme, cfg, out_dir, oracle_checkpoint=None, ult_checkpoint=None, env_factory=LocomotionEnv):
    """
    Run one comparison scheme end to end, writing metrics, the final model
    and the step accounting under out_dir.

    Returns:
        dict -- the summary written to summary.json
    """
    if scheme not in SCHEMES:
        raise UsageError("Unknown scheme {}, use any of {}".format(scheme, SCHEMES))
    os.makedirs(out_dir, exist_ok=True)
    final = os.path.join(out_dir, "final.ultc")
    extra = {}

    if scheme == "oracle":
        oracle, metrics = train_oracle(cfg, out_dir, env_factory=env_factory)
        write_summary(out_dir, scheme, oracle_budget(cfg), extra={"metrics": metrics.as_dict()})
        return utils.read_json_without_comments(os.path.join(out_dir, "summary.json"))
    if scheme == "ppo":
        trainer = train_ppo(cfg, out_dir, env_factory=env_factory)
        write_summary(out_dir, scheme, trainer.env_steps)
        return utils.read_json_without_comments(os.path.join(out_dir, "summary.json"))
    if scheme == "post-hoc":
        if ult_checkpoint is None:
            raise UsageError("post-hoc transfer needs --checkpoint of a unified model")
        model, header = checkpoint.load_model(ult_checkpoint, cfg["net"])
        alpha = header["metadata"].get("alpha")
        if alpha is not None and alpha != 1.0:
            logger.warning("post-hoc transfer expects an alpha = 1 model, got alpha = {}".format(alpha))
        distiller, before, after = post_hoc_transfer(model, cfg, out_dir=out_dir, env_factory=env_factory)
        checkpoint.save_model(model, final, {"scheme": scheme, "alpha": alpha, "config": cfg})
        extra = {"before": before.as_dict(), "after": after.as_dict()}
        write_summary(out_dir, scheme, distiller.env_steps, header["metadata"].get("env_steps", 0), extra)
        return utils.read_json_without_comments(os.path.join(out_dir, "summary.json"))

    oracle, oracle_steps = _load_oracle(cfg, out_dir, oracle_checkpoint, env_factory)
    if scheme == "joint":
        trainer = train_joint(oracle, cfg, out_dir, env_factory=env_factory)
        write_summary(out_dir, scheme, trainer.env_steps, oracle_steps)
        return utils.read_json_without_comments(os.path.join(out_dir, "summary.json"))

    student = build_student(cfg)
    if scheme == "offline":
        distiller = distill_offline(oracle, student, cfg, out_dir=out_dir, env_factory=env_factory)
    elif scheme == "online":
        distiller = distill_online(oracle, student, cfg, out_dir=out_dir, env_factory=env_factory)
    else:
        distiller = distill_two_stage(oracle, student, cfg, out_dir=out_dir, env_factory=env_factory)
    checkpoint.save_model(
        student, final, {"scheme": scheme, "env_steps": distiller.env_steps, "config": cfg}
    )
    extra = {
        "action_gaps": distiller.action_gaps,
        "student_fraction": distiller.dataset.source_fraction(SOURCE_STUDENT),
    }
    write_summary(out_dir, scheme, distiller.env_steps, oracle_steps, extra)
    return utils.read_json_without_comments(os.path.join(out_dir, "summary.json"))


if __name__ == "__main__":
    print("this is only a module")
