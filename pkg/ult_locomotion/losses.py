#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Training objective: next state-action prediction, action imitation and the
clipped PPO surrogate with value and entropy terms.

    L = L_RL + lambda * (L_n + beta * L_a)
    L_RL = surrogate + value_coef * value - entropy_coef * entropy
"""

import math
from dataclasses import asdict, dataclass

import torch

from . import log
from .errors import ConfigurationError, InternalError
from .network import entropy_by_head, log_prob_by_head

logger = log.setup_custom_logger("ult_locomotion")


@dataclass
class LossWeights:
    beta: float = 1.0
    ult_weight: float = 1.0
    value_coef: float = 1.0
    entropy_coef: float = 0.005
    clip_range: float = 0.2
    use_next_prediction: bool = True
    clipped_value: bool = False

    def __post_init__(self):
        for name in ["beta", "ult_weight", "value_coef", "entropy_coef", "clip_range"]:
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError("Loss weight {} must be finite".format(name))
        if not self.clip_range > 0:
            raise ConfigurationError("clip range must be positive")

    @classmethod
    def from_config(cls, losses_cfg):
        return cls(**losses_cfg)


@dataclass
class LossReport:
    next_pred: float
    imitation: float
    ult: float
    surrogate: float
    value: float
    entropy: float
    rl: float
    total: float
    approx_kl: float

    def as_dict(self):
        return asdict(self)


def next_pred_loss(predicted, targets, lengths=None):
    """
    Mean squared error between the decode at position k and the true token
    z_{k+1}, averaged over the (length - 1) pairs of each window and then
    over windows with at least one pair.

    Arguments:
        predicted {torch.Tensor} -- (B, L, D) or (L, D) decoded tokens
        targets {torch.Tensor} -- same shape, logged tokens (no gradient)
        lengths {torch.Tensor} -- valid tokens per window (default: all L)

    Returns:
        torch.Tensor -- scalar L_n
    """
    if predicted.shape != targets.shape:
        raise InternalError(
            "Prediction {} and target {} sequences are misaligned".format(
                tuple(predicted.shape), tuple(targets.shape)
            )
        )
    if predicted.dim() == 2:
        predicted = predicted.unsqueeze(0)
        targets = targets.unsqueeze(0)
    batch, length = predicted.shape[0], predicted.shape[1]
    if lengths is None:
        lengths = torch.full((batch,), length, dtype=torch.long)
    pairs = torch.as_tensor(lengths, dtype=torch.long) - 1
    if length < 2:
        return predicted.sum() * 0.0

    squared = (predicted[:, :-1] - targets[:, 1:].detach()).pow(2).sum(dim=-1)
    positions = torch.arange(length - 1)[None, :]
    mask = (positions < pairs[:, None]).to(squared.dtype)
    per_window = (squared * mask).sum(dim=1) / pairs.clamp(min=1).to(squared.dtype)
    has_pairs = pairs > 0
    if not bool(has_pairs.any()):
        return predicted.sum() * 0.0
    return per_window[has_pairs].mean()


def imitation_loss(teacher_mean, student_mean):
    """
    Squared distance between teacher and student means, batch averaged.
    The teacher mean is a constant target.
    """
    return (teacher_mean.detach() - student_mean).pow(2).sum(dim=-1).mean()


def ult_loss(next_pred, imitation, beta):
    return next_pred + beta * imitation


def ppo_loss(
    outputs,
    actions,
    old_log_probs,
    advantages,
    returns,
    teacher_flags,
    old_values=None,
    clip_range=0.2,
    clipped_value=False,
):
    """
    Clipped PPO terms, each sample scored under the head that produced it.

    Returns:
        tuple -- (surrogate, value loss, entropy, approx KL) as scalar tensors
    """
    if teacher_flags is None:
        raise InternalError("Rollout samples carry no provenance flags")
    new_log_probs = log_prob_by_head(outputs, actions, teacher_flags)
    log_ratio = new_log_probs - old_log_probs
    ratio = torch.exp(log_ratio)
    unclipped = -advantages * ratio
    clipped = -advantages * torch.clamp(ratio, 1.0 - clip_range, 1.0 + clip_range)
    surrogate = torch.max(unclipped, clipped).mean()

    if outputs.value is None:
        value_loss = surrogate * 0.0
    elif clipped_value and old_values is not None:
        value_clipped = old_values + (outputs.value - old_values).clamp(-clip_range, clip_range)
        value_loss = torch.max(
            (outputs.value - returns).pow(2), (value_clipped - returns).pow(2)
        ).mean()
    else:
        value_loss = (outputs.value - returns).pow(2).mean()

    entropy = entropy_by_head(outputs, teacher_flags).mean()
    approx_kl = (old_log_probs - new_log_probs).mean().detach()
    return surrogate, value_loss, entropy, approx_kl


def rl_loss(surrogate, value_loss, entropy, weights):
    return surrogate + weights.value_coef * value_loss - weights.entropy_coef * entropy


def total_loss(rl, ult, weights):
    return rl + weights.ult_weight * ult


def compute_losses(outputs, minibatch, lengths, weights):
    """
    Every term for one minibatch.

    Arguments:
        outputs {PolicyOutputs} -- fresh forward pass over the minibatch windows
        minibatch {dict} -- tensors: actions, log_probs, advantages, returns, values, teacher_flags
        lengths {torch.Tensor} -- valid tokens per window
        weights {LossWeights}

    Returns:
        tuple -- (total loss tensor, LossReport)
    """
    surrogate, value_loss, entropy, approx_kl = ppo_loss(
        outputs,
        minibatch["actions"],
        minibatch["log_probs"],
        minibatch["advantages"],
        minibatch["returns"],
        minibatch.get("teacher_flags"),
        old_values=minibatch.get("values"),
        clip_range=weights.clip_range,
        clipped_value=weights.clipped_value,
    )
    zero = surrogate * 0.0
    if weights.use_next_prediction and outputs.predicted_tokens is not None:
        next_pred = next_pred_loss(outputs.predicted_tokens, outputs.target_tokens, lengths)
    else:
        next_pred = zero
    if outputs.teacher_mean is not None and outputs.predicted_tokens is not None:
        imitation = imitation_loss(outputs.teacher_mean, outputs.student_mean)
    else:
        imitation = zero

    ult = ult_loss(next_pred, imitation, weights.beta)
    rl = rl_loss(surrogate, value_loss, entropy, weights)
    total = total_loss(rl, ult, weights)
    report = LossReport(
        next_pred=float(next_pred.detach()),
        imitation=float(imitation.detach()),
        ult=float(ult.detach()),
        surrogate=float(surrogate.detach()),
        value=float(value_loss.detach()),
        entropy=float(entropy.detach()),
        rl=float(rl.detach()),
        total=float(total.detach()),
        approx_kl=float(approx_kl),
    )
    return total, report


if __name__ == "__main__":
    print("this is only a module")
