#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Single-phase unified PPO training.

Every update collects `horizon` steps from all agents, executing the
teacher or student action per agent as the mixer mask says, runs GAE and
then optimizes L = L_RL + lambda * (L_n + beta * L_a) over shuffled
minibatches for a number of mini-epochs.
"""

import copy
import json
import math
import os
from dataclasses import dataclass, fields

import numpy as np
import torch

from . import checkpoint, log, utils
from .env import LocomotionEnv
from .errors import TrainingDivergenceError
from .losses import LossWeights, compute_losses
from .mixer import MixerState
from .network import NetConfig, ULTNet
from .rollout import RolloutStorage
from .trajectorywindow import TrajectoryWindow

logger = log.setup_custom_logger("ult_locomotion")

METRIC_COLUMNS = [
    "update",
    "env_steps",
    "mean_reward",
    "lin_track",
    "ang_track",
    "L_n",
    "L_a",
    "L_RL",
    "approx_kl",
    "lr",
    "mean_curriculum_level",
    "teacher_fraction",
    "scheme",
]


@dataclass
class TrainConfig:
    num_agents: int = 256
    horizon: int = 24
    mini_epochs: int = 5
    minibatch_size: int = 1536
    learning_rate: float = 3e-3
    lr_schedule: str = "adaptive-kl"
    lr_bounds: tuple = (1e-6, 1e-2)
    cosine_final_lr: float = 3e-5
    desired_kl: float = 0.008
    weight_decay: float = 0.01
    gamma: float = 0.99
    gae_lambda: float = 0.95
    total_updates: int = 1500
    seed: int = 1
    max_grad_norm: float = 1.0
    checkpoint_interval: int = 100
    max_incidents: int = 3

    @classmethod
    def from_config(cls, train_cfg):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in train_cfg.items() if k in known})


def lr_schedule(lr, approx_kl, update, config, initial_lr=None):
    """
    Next learning rate.

    adaptive-kl: divide by 1.5 when KL exceeds twice the target, multiply by
    1.5 when it falls below half of it, clamp to lr_bounds.
    cosine: decay from the initial rate to cosine_final_lr over total_updates.

    Arguments:
        lr {float} -- current learning rate
        approx_kl {float} -- approximate KL of the last optimizer step
        update {int} -- update index (0-based)
        config {TrainConfig}

    Keyword Arguments:
        initial_lr {float} -- cosine start (default: config.learning_rate)

    Returns:
        float -- new learning rate
    """
    if config.lr_schedule == "cosine":
        start = config.learning_rate if initial_lr is None else initial_lr
        progress = min(max(update / float(config.total_updates), 0.0), 1.0)
        return config.cosine_final_lr + 0.5 * (start - config.cosine_final_lr) * (
            1.0 + math.cos(math.pi * progress)
        )
    new_lr = lr
    if approx_kl > 2.0 * config.desired_kl:
        new_lr = lr / 1.5
    elif approx_kl < config.desired_kl / 2.0:
        new_lr = lr * 1.5
    low, high = config.lr_bounds
    clamped = min(max(new_lr, low), high)
    if clamped != new_lr and lr != clamped:
        logger.warning("Learning rate clamped to {}".format(clamped))
    return clamped


def derive_seeds(seed, count):
    """
    Independent integer seeds for the trainer's generators
    """
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


class UnifiedTrainer:
    """
    PPO trainer for the unified transformer; the same loop trains the oracle
    (alpha = 1, lambda = 0) and the vanilla PPO baseline (alpha = 0, lambda = 0).
    """

    scheme = "ult"

    def __init__(self, cfg, out_dir, model=None, env_factory=LocomotionEnv, scheme=None):
        self.cfg = cfg
        self.out_dir = out_dir
        if scheme is not None:
            self.scheme = scheme
        self.train_config = TrainConfig.from_config(cfg["train"])
        self.weights = LossWeights.from_config(cfg["losses"])
        tc = self.train_config

        env_seed, act_seed, mixer_seed, shuffle_seed, torch_seed = derive_seeds(tc.seed, 5)
        torch.manual_seed(torch_seed)
        self.net_config = NetConfig.from_dict(cfg["net"])
        self.model = model if model is not None else ULTNet(self.net_config)
        self.env = env_factory(cfg["env"], tc.num_agents, env_seed)
        self.window = TrajectoryWindow(
            tc.num_agents, self.net_config.obs_dim, self.net_config.action_dim, self.net_config.window
        )
        self.act_rng = np.random.default_rng(act_seed)
        self.shuffle_rng = np.random.default_rng(shuffle_seed)
        self.mixer = MixerState.create(
            tc.num_agents,
            cfg["mixer"]["alpha"],
            cfg["mixer"]["resample_period"],
            np.random.default_rng(mixer_seed),
        )
        self.storage = RolloutStorage(
            tc.horizon,
            tc.num_agents,
            self.net_config.window,
            self.net_config.token_dim,
            self.net_config.privilege_dim,
            self.net_config.action_dim,
        )
        self.lr = tc.learning_rate
        # product of all incident halvings, applied on top of the cosine schedule
        self.lr_scale = 1.0
        self.optimizer = torch.optim.AdamW(
            self.trainable_parameters(), lr=self.lr, weight_decay=tc.weight_decay
        )
        self.update = 0
        self.env_steps = 0
        self.incidents = 0

        proprio, self.privilege = self.env.observe()
        self.window.start_episode(proprio)
        self.model.normalizer.update(proprio)

        if out_dir is not None:
            os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)
            self.metrics_file = os.path.join(out_dir, "metrics.csv")
        else:
            self.metrics_file = None

    def trainable_parameters(self):
        return list(self.model.parameters())

    def label_actions(self, tokens, lengths, privilege):
        """
        Per-sample action labels stored with the rollout (none by default)
        """
        return None

    def extra_loss(self, outputs, minibatch):
        return None

    def _set_lr(self, lr):
        self.lr = lr
        for group in self.optimizer.param_groups:
            group["lr"] = lr

    def collect(self):
        """
        Roll out one horizon; returns collection statistics
        """
        tc = self.train_config
        self.storage.clear()
        reward_sum = 0.0
        lin_sum = 0.0
        ang_sum = 0.0
        teacher_sum = 0.0
        finished = []
        self.model.eval()
        for _ in range(tc.horizon):
            mask = self.mixer.tick()
            tokens, lengths = self.window.snapshot()
            result = self.model.act(
                tokens,
                lengths,
                self.privilege,
                mode="train",
                teacher_mask=mask,
                rng=self.act_rng,
            )
            labels = self.label_actions(tokens, lengths, self.privilege)
            step = self.env.step(result.actions)

            values = result.values if result.values is not None else np.zeros(tc.num_agents)
            rewards = step.reward + tc.gamma * values * step.timeout
            self.storage.add(
                tokens,
                lengths,
                self.privilege,
                result.actions,
                result.teacher_flags,
                result.log_probs,
                values,
                labels,
            )
            self.storage.add_outcome(rewards, step.done)

            alive = np.flatnonzero(~step.done)
            ended = np.flatnonzero(step.done)
            if len(alive):
                self.window.push_step(step.proprio[alive], result.actions[alive], alive)
            if len(ended):
                self.window.start_episode(step.proprio[ended], ended)
            self.model.normalizer.update(step.proprio)
            self.privilege = step.privilege

            reward_sum += float(step.reward.mean())
            lin_sum += float(step.raw_terms["lin_vel_tracking"].mean())
            ang_sum += float(step.raw_terms["ang_vel_tracking"].mean())
            teacher_sum += float(mask.mean())
            finished += step.finished
        self.env_steps += tc.horizon * tc.num_agents
        return {
            "mean_reward": reward_sum / tc.horizon,
            "lin_track": lin_sum / tc.horizon,
            "ang_track": ang_sum / tc.horizon,
            "teacher_fraction": teacher_sum / tc.horizon,
            "finished": finished,
        }

    @torch.no_grad()
    def bootstrap_value(self):
        tokens, lengths = self.window.snapshot()
        outputs = self.model.evaluate(tokens, lengths, self.privilege)
        if outputs.value is None:
            return np.zeros(self.train_config.num_agents)
        return outputs.value.double().numpy()

    def _minibatch(self, batch, idx):
        as_tensor = self.model.as_tensor
        minibatch = {
            "actions": as_tensor(batch.actions[idx]),
            "log_probs": as_tensor(batch.log_probs[idx]),
            "advantages": as_tensor(batch.advantages[idx]),
            "returns": as_tensor(batch.returns[idx]),
            "values": as_tensor(batch.values[idx]),
            "teacher_flags": torch.as_tensor(batch.teacher_flags[idx]),
        }
        if batch.labels is not None:
            minibatch["labels"] = as_tensor(batch.labels[idx])
        return minibatch

    def optimize(self, batch):
        """
        Mini-epochs over the batch; returns mean loss parts
        """
        tc = self.train_config
        self.model.train()
        sums = {"L_n": 0.0, "L_a": 0.0, "L_RL": 0.0, "approx_kl": 0.0}
        steps = 0
        params = self.trainable_parameters()
        for _ in range(tc.mini_epochs):
            for idx in batch.minibatches(tc.minibatch_size, self.shuffle_rng):
                lengths = torch.as_tensor(batch.lengths[idx], dtype=torch.long)
                outputs = self.model.evaluate(batch.tokens[idx], lengths, batch.privilege[idx])
                minibatch = self._minibatch(batch, idx)
                loss, report = compute_losses(outputs, minibatch, lengths, self.weights)
                extra = self.extra_loss(outputs, minibatch)
                if extra is not None:
                    loss = loss + extra
                if not torch.isfinite(loss):
                    raise FloatingPointError("non-finite loss {}".format(float(loss)))

                self.optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(params, tc.max_grad_norm)
                self.optimizer.step()
                if tc.lr_schedule == "adaptive-kl":
                    self._set_lr(lr_schedule(self.lr, report.approx_kl, self.update, tc))

                logger.debug(
                    "minibatch: L_n {:.5f} L_a {:.5f} L_RL {:.5f} kl {:.5f}".format(
                        report.next_pred, report.imitation, report.rl, report.approx_kl
                    )
                )
                sums["L_n"] += report.next_pred
                sums["L_a"] += report.imitation
                sums["L_RL"] += report.rl
                sums["approx_kl"] += report.approx_kl
                steps += 1
        return {k: v / max(steps, 1) for k, v in sums.items()}

    def _snapshot(self):
        return (
            copy.deepcopy(self.model.state_dict()),
            copy.deepcopy(self.optimizer.state_dict()),
        )

    def _restore(self, snapshot):
        model_state, optimizer_state = snapshot
        self.model.load_state_dict(model_state)
        self.optimizer.load_state_dict(optimizer_state)

    def run_update(self):
        """
        One collection + optimization cycle; returns the metrics row
        """
        tc = self.train_config
        if tc.lr_schedule == "cosine":
            scheduled = self.lr_scale * lr_schedule(self.lr, 0.0, self.update, tc)
            self._set_lr(max(scheduled, tc.lr_bounds[0]))
        snapshot = self._snapshot()
        stats = self.collect()
        batch = self.storage.finish(self.bootstrap_value(), tc.gamma, tc.gae_lambda)
        batch.normalized()
        try:
            losses = self.optimize(batch)
            self.incidents = 0
        except FloatingPointError as e:
            self._restore(snapshot)
            self.incidents += 1
            self.lr_scale /= 2.0
            self._set_lr(max(self.lr / 2.0, tc.lr_bounds[0]))
            logger.warning(
                "Incident at update {}: {}; restored parameters, lr now {}".format(
                    self.update + 1, e, self.lr
                )
            )
            if self.incidents >= tc.max_incidents:
                raise TrainingDivergenceError(
                    "{} consecutive non-finite updates, giving up".format(self.incidents)
                )
            losses = {"L_n": float("nan"), "L_a": float("nan"), "L_RL": float("nan"), "approx_kl": float("nan")}

        self.update += 1
        row = {
            "update": self.update,
            "env_steps": self.env_steps,
            "mean_reward": stats["mean_reward"],
            "lin_track": stats["lin_track"],
            "ang_track": stats["ang_track"],
            "L_n": losses["L_n"],
            "L_a": losses["L_a"],
            "L_RL": losses["L_RL"],
            "approx_kl": losses["approx_kl"],
            "lr": self.lr,
            "mean_curriculum_level": float(np.mean(self.env.levels)),
            "teacher_fraction": stats["teacher_fraction"],
            "scheme": self.scheme,
        }
        logger.info(
            "update {:5d} | reward {:.4f} | L_n {:.4f} L_a {:.4f} L_RL {:.4f} | lr {:.2e} | teacher {:.2f} | level {:.2f}".format(
                self.update,
                row["mean_reward"],
                row["L_n"],
                row["L_a"],
                row["L_RL"],
                self.lr,
                row["teacher_fraction"],
                row["mean_curriculum_level"],
            )
        )
        return row

    def write_metrics(self, row):
        if self.metrics_file is not None:
            utils.append_csv_row(self.metrics_file, METRIC_COLUMNS, row)

    def checkpoint_file(self, update=None):
        name = "update_{:05d}.ultc".format(self.update if update is None else update)
        return os.path.join(self.out_dir, "checkpoints", name)

    def save(self, path):
        """
        Model, optimizer moments and everything needed to resume
        """
        metadata = {
            "scheme": self.scheme,
            "update": self.update,
            "env_steps": self.env_steps,
            "alpha": self.mixer.alpha,
            "config": self.cfg,
        }
        checkpoint.save_model(self.model, path, metadata)
        checkpoint.save_optimizer(self.optimizer, checkpoint.optimizer_path(path))

        env_state = self.env.state_dict()
        arrays = {"env." + k: v for k, v in env_state["arrays"].items()}
        arrays["window.tokens"] = self.window.tokens
        arrays["window.lengths"] = self.window.lengths
        arrays["mixer.mask"] = self.mixer.mask
        arrays["privilege"] = self.privilege
        meta = {
            "update": self.update,
            "env_steps": self.env_steps,
            "lr": self.lr,
            "lr_scale": self.lr_scale,
            "incidents": self.incidents,
            "scheme": self.scheme,
            "env_rngs": env_state["rngs"],
            "episodes_finished": env_state["episodes_finished"],
            "act_rng": utils.generator_state(self.act_rng),
            "shuffle_rng": utils.generator_state(self.shuffle_rng),
            "mixer_rng": utils.generator_state(self.mixer.rng),
            "mixer_steps": self.mixer.steps_since_resample,
            "mixer_alpha": self.mixer.alpha,
        }
        checkpoint.save_training_state(checkpoint.state_path(path), arrays, meta)
        logger.info("Checkpoint written: {}".format(path))

    def resume(self, path):
        model, _ = checkpoint.load_model(path, self.cfg["net"])
        self.model.load_state_dict(model.state_dict())
        checkpoint.load_optimizer(self.optimizer, checkpoint.optimizer_path(path))
        arrays, meta = checkpoint.load_training_state(checkpoint.state_path(path))

        env_arrays = {k[len("env.") :]: v for k, v in arrays.items() if k.startswith("env.")}
        self.env.load_state_dict(
            {
                "arrays": env_arrays,
                "rngs": meta["env_rngs"],
                "episodes_finished": meta["episodes_finished"],
            }
        )
        self.window.load_state_dict(
            {"tokens": arrays["window.tokens"], "lengths": arrays["window.lengths"]}
        )
        self.mixer.mask = np.array(arrays["mixer.mask"], dtype=bool)
        self.mixer.rng = utils.restore_generator(meta["mixer_rng"])
        self.mixer.steps_since_resample = meta["mixer_steps"]
        self.mixer.alpha = meta["mixer_alpha"]
        self.privilege = np.array(arrays["privilege"])
        self.act_rng = utils.restore_generator(meta["act_rng"])
        self.shuffle_rng = utils.restore_generator(meta["shuffle_rng"])
        self.update = meta["update"]
        self.env_steps = meta["env_steps"]
        self.incidents = meta["incidents"]
        self.lr_scale = meta.get("lr_scale", 1.0)
        self._set_lr(meta["lr"])
        logger.info("Resumed from {} at update {}".format(path, self.update))

    def train(self, total_updates=None):
        """
        Run until total_updates; returns the final checkpoint path
        """
        tc = self.train_config
        total = tc.total_updates if total_updates is None else total_updates
        if self.out_dir is not None:
            utils.write_json(self.cfg, os.path.join(self.out_dir, "config.json"))
        while self.update < total:
            row = self.run_update()
            self.write_metrics(row)
            if self.out_dir is not None and self.update % tc.checkpoint_interval == 0:
                self.save(self.checkpoint_file())
        if self.out_dir is None:
            return None
        final = os.path.join(self.out_dir, "final.ultc")
        self.save(final)
        with open(os.path.join(self.out_dir, "summary.json"), "w") as out_f:
            json.dump(
                {"scheme": self.scheme, "updates": self.update, "env_steps": self.env_steps},
                out_f,
                indent=2,
                sort_keys=True,
            )
        return final


def train(cfg, out_dir, resume=None, env_factory=LocomotionEnv, model=None, scheme="ult"):
    """
    Train a unified transformer (or any PolicyBase model) with the unified loop.

    Arguments:
        cfg {dict} -- validated configuration
        out_dir {str} -- run directory (metrics.csv, checkpoints/, final.ultc)

    Keyword Arguments:
        resume {str} -- checkpoint to continue from (default: None)
        env_factory {callable} -- (env_cfg, num_agents, seed) -> environment
        model {PolicyBase} -- model to train (default: a fresh ULTNet)
        scheme {str} -- scheme tag written to the metrics

    Returns:
        tuple -- (trainer, final checkpoint path)
    """
    trainer = UnifiedTrainer(cfg, out_dir, model=model, env_factory=env_factory, scheme=scheme)
    if resume is not None:
        trainer.resume(resume)
    final = trainer.train()
    return trainer, final


if __name__ == "__main__":
    print("this is only a module")
