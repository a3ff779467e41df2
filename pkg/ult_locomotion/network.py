#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

The unified transformer and the privileged oracle policy.

The proprioceptive tokens h_0 .. h_{L-1} form a causally masked stream whose
computation never looks at the privilege token h_e. The privilege token is
evaluated as one extra query per layer that attends to the valid proprio
keys and to itself, which is exactly the last row of a causal attention over
[h_0 .. h_{L-1}, h_e]. Student outputs are therefore bit-identical with and
without privileged input.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import torch
import torch.nn as nn
from torch.distributions import Normal

from . import log, mixer
from .errors import ConfigurationError, UsageError

logger = log.setup_custom_logger("ult_locomotion")


@dataclass
class NetConfig:
    obs_dim: int
    action_dim: int
    privilege_dim: int
    window: int = 15
    embed_dim: int = 128
    num_layers: int = 2
    num_heads: int = 4
    ff_dim: int = 256
    encoder_hidden: List[int] = field(default_factory=lambda: [256, 128])
    teacher_hidden: List[int] = field(default_factory=lambda: [128, 64])
    value_hidden: List[int] = field(default_factory=lambda: [64])
    init_log_std: float = -1.0
    log_std_bounds: List[float] = field(default_factory=lambda: [-4.0, 1.0])
    use_teacher: bool = True
    value_from_privilege: bool = True
    normalize_observations: bool = False

    def __post_init__(self):
        for name in [
            "obs_dim",
            "action_dim",
            "privilege_dim",
            "window",
            "embed_dim",
            "num_layers",
            "num_heads",
            "ff_dim",
        ]:
            if getattr(self, name) is None or getattr(self, name) <= 0:
                raise ConfigurationError(
                    "NetConfig.{} must be positive, got {}".format(name, getattr(self, name))
                )
        if self.embed_dim % self.num_heads != 0:
            raise ConfigurationError(
                "embed_dim {} is not divisible by num_heads {}".format(
                    self.embed_dim, self.num_heads
                )
            )

    @property
    def token_dim(self):
        return self.obs_dim + self.action_dim

    @property
    def action_slice(self):
        return slice(self.obs_dim, self.obs_dim + self.action_dim)

    @property
    def needs_privilege(self):
        return self.use_teacher or self.value_from_privilege

    @classmethod
    def from_dict(cls, values):
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in values.items() if k in known})

    def as_dict(self):
        return asdict(self)


@dataclass
class PolicyOutputs:
    """
    One forward pass over a batch of windows.
    """

    student_mean: torch.Tensor
    student_log_std: torch.Tensor
    teacher_mean: Optional[torch.Tensor] = None
    teacher_log_std: Optional[torch.Tensor] = None
    value: Optional[torch.Tensor] = None
    predicted_tokens: Optional[torch.Tensor] = None
    target_tokens: Optional[torch.Tensor] = None
    hidden: Optional[torch.Tensor] = None
    privilege_hidden: Optional[torch.Tensor] = None
    attention: list = field(default_factory=list)

    def distribution(self, teacher):
        if teacher:
            if self.teacher_mean is None:
                raise UsageError("No teacher head in this model")
            return Normal(self.teacher_mean, self.teacher_log_std.exp().expand_as(self.teacher_mean))
        return Normal(self.student_mean, self.student_log_std.exp().expand_as(self.student_mean))


@dataclass
class ActResult:
    actions: np.ndarray
    log_probs: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    teacher_flags: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


def mlp(in_dim, hidden, out_dim, activation=nn.ELU):
    layers = []
    last = in_dim
    for width in hidden:
        layers += [nn.Linear(last, width), activation()]
        last = width
    layers.append(nn.Linear(last, out_dim))
    return nn.Sequential(*layers)


class ObservationNormalizer(nn.Module):
    """
    Running mean / variance of observations, kept as buffers so that they
    travel with checkpoints and exports. Identity when disabled.
    """

    def __init__(self, dim, enabled=False, eps=1e-8):
        super().__init__()
        self.enabled = enabled
        self.eps = eps
        self.register_buffer("mean", torch.zeros(dim))
        self.register_buffer("var", torch.ones(dim))
        self.register_buffer("count", torch.zeros(()))

    @torch.no_grad()
    def update(self, observations):
        if not self.enabled:
            return
        x = torch.as_tensor(
            np.reshape(observations, (-1, self.mean.shape[0])), dtype=self.mean.dtype
        )
        batch_count = x.shape[0]
        if batch_count == 0:
            return
        batch_mean = x.mean(dim=0)
        batch_var = x.var(dim=0, unbiased=False)
        total = self.count + batch_count
        delta = batch_mean - self.mean
        m_a = self.var * self.count
        m_b = batch_var * batch_count
        self.mean.copy_(self.mean + delta * batch_count / total)
        self.var.copy_((m_a + m_b + delta**2 * self.count * batch_count / total) / total)
        self.count.copy_(total)

    def forward(self, x):
        if not self.enabled:
            return x
        return (x - self.mean) / torch.sqrt(self.var + self.eps)


class CausalBlock(nn.Module):
    """
    Pre-norm transformer block with a causal proprio stream and an optional
    privilege query appended at the end.
    """

    def __init__(self, embed_dim, num_heads, ff_dim):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = embed_dim // num_heads
        self.ln_attn = nn.LayerNorm(embed_dim)
        self.qkv = nn.Linear(embed_dim, 3 * embed_dim)
        self.proj = nn.Linear(embed_dim, embed_dim)
        self.ln_ff = nn.LayerNorm(embed_dim)
        self.ff = nn.Sequential(
            nn.Linear(embed_dim, ff_dim), nn.GELU(), nn.Linear(ff_dim, embed_dim)
        )

    def _heads(self, x):
        # (..., L, d) -> (..., H, L, d_h)
        shape = x.shape[:-1] + (self.num_heads, self.head_dim)
        return x.reshape(shape).transpose(-3, -2)

    def _merge(self, x):
        x = x.transpose(-3, -2)
        return x.reshape(x.shape[:-2] + (self.num_heads * self.head_dim,))

    def forward(self, h, h_e=None, lengths=None):
        batch, length, dim = h.shape
        q, k, v = self.qkv(self.ln_attn(h)).split(dim, dim=-1)
        q, k, v = self._heads(q), self._heads(k), self._heads(v)

        causal = torch.triu(
            torch.ones(length, length, dtype=torch.bool, device=h.device), diagonal=1
        )
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(causal, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = h + self.proj(self._merge(weights @ v))
        out = out + self.ff(self.ln_ff(out))

        if h_e is None:
            return out, None, weights, None

        q_e, k_e, v_e = self.qkv(self.ln_attn(h_e)).split(dim, dim=-1)
        q_e = q_e.reshape(batch, self.num_heads, 1, self.head_dim)
        k_e = k_e.reshape(batch, self.num_heads, 1, self.head_dim)
        v_e = v_e.reshape(batch, self.num_heads, 1, self.head_dim)
        keys = torch.cat([k, k_e], dim=2)
        values = torch.cat([v, v_e], dim=2)

        valid = torch.arange(length + 1, device=h.device)[None, :] < lengths[:, None]
        valid[:, length] = True
        scores_e = (q_e @ keys.transpose(-2, -1)) / math.sqrt(self.head_dim)
        scores_e = scores_e.masked_fill(~valid[:, None, None, :], float("-inf"))
        weights_e = torch.softmax(scores_e, dim=-1)
        mixed = (weights_e @ values).reshape(batch, dim)
        out_e = h_e + self.proj(mixed)
        out_e = out_e + self.ff(self.ln_ff(out_e))
        return out, out_e, weights, weights_e[:, :, 0, :]


class PolicyBase(nn.Module):
    """
    Shared acting logic: Gaussian sampling of both heads, mixing by the
    teacher mask and log-probabilities under the producing head.
    """

    kind = "policy"
    deployable = True

    def param_dtype(self):
        return next(self.parameters()).dtype

    def as_tensor(self, x):
        if x is None:
            return None
        if isinstance(x, torch.Tensor):
            return x.to(self.param_dtype())
        return torch.as_tensor(np.asarray(x), dtype=self.param_dtype())

    def evaluate(self, tokens, lengths=None, privilege=None):
        raise NotImplementedError

    @torch.no_grad()
    def act(self, tokens, lengths=None, privilege=None, mode="train", teacher_mask=None, rng=None):
        """
        Act on a batch of windows.

        Arguments:
            tokens {np.ndarray} -- (B, L, m + n) right-padded windows
            lengths {np.ndarray} -- valid tokens per window (default: all L)
            privilege {np.ndarray} -- (B, privilege_dim), forbidden in deploy mode
            mode {str} -- "train" samples both heads and mixes, "deploy" returns the student mean
            teacher_mask {np.ndarray} -- per-window teacher flags for train mode (default: all student)
            rng {np.random.Generator} -- source of the sampling noise in train mode

        Returns:
            ActResult
        """
        if mode == "deploy":
            if not self.deployable:
                raise UsageError("A {} model cannot act in deploy mode".format(self.kind))
            if privilege is not None:
                raise UsageError("Privilege input is not allowed in deploy mode")
            outputs = self.evaluate(tokens, lengths)
            return ActResult(actions=outputs.student_mean.double().numpy())
        if mode != "train":
            raise UsageError("Unknown act mode: {}".format(mode))
        if rng is None:
            raise UsageError("Train-mode acting needs a random generator")

        outputs = self.evaluate(tokens, lengths, privilege)
        batch, action_dim = outputs.student_mean.shape
        if teacher_mask is None:
            teacher_mask = np.zeros(batch, dtype=bool)
        teacher_mask = np.asarray(teacher_mask, dtype=bool)
        if teacher_mask.any() and outputs.teacher_mean is None:
            raise UsageError("Teacher actions requested from a model without teacher head")

        # both heads always consume noise, keeping the generator stream fixed
        teacher_noise = rng.standard_normal((batch, action_dim))
        student_noise = rng.standard_normal((batch, action_dim))
        student_std = outputs.student_log_std.exp().double().numpy()
        student_actions = outputs.student_mean.double().numpy() + student_std * student_noise
        if outputs.teacher_mean is not None:
            teacher_std = outputs.teacher_log_std.exp().double().numpy()
            teacher_actions = (
                outputs.teacher_mean.double().numpy() + teacher_std * teacher_noise
            )
        else:
            teacher_actions = student_actions
        actions, flags = mixer.mix_actions(teacher_mask, teacher_actions, student_actions)

        log_probs = log_prob_by_head(outputs, self.as_tensor(actions), torch.as_tensor(flags))
        values = None if outputs.value is None else outputs.value.double().numpy()
        return ActResult(
            actions=actions,
            log_probs=log_probs.double().numpy(),
            values=values,
            teacher_flags=flags,
            diagnostics={
                "student_mean": outputs.student_mean.double().numpy(),
                "teacher_mean": None
                if outputs.teacher_mean is None
                else outputs.teacher_mean.double().numpy(),
            },
        )


def log_prob_by_head(outputs, actions, teacher_flags):
    """
    Log-density of each action under the head recorded in teacher_flags
    """
    student = outputs.distribution(False).log_prob(actions).sum(dim=-1)
    if outputs.teacher_mean is None:
        return student
    teacher = outputs.distribution(True).log_prob(actions).sum(dim=-1)
    return torch.where(teacher_flags.to(torch.bool), teacher, student)


def entropy_by_head(outputs, teacher_flags):
    student = outputs.distribution(False).entropy().sum(dim=-1)
    if outputs.teacher_mean is None:
        return student
    teacher = outputs.distribution(True).entropy().sum(dim=-1)
    return torch.where(teacher_flags.to(torch.bool), teacher, student)


class ULTNet(PolicyBase):
    """
    Unified teacher/student transformer.

    With deploy=True the privilege encoder, teacher head and value head are
    never built; such a model can only run the student path.
    """

    kind = "ult"

    def __init__(self, config, deploy=False):
        super().__init__()
        self.config = config
        self.deploy = deploy
        if deploy:
            self.kind = "ult-deploy"
        d = config.embed_dim

        self.normalizer = ObservationNormalizer(config.obs_dim, config.normalize_observations)
        self.input_projection = nn.Linear(config.token_dim, d)
        self.pos_embedding = nn.Parameter(torch.zeros(config.window, d))
        self.blocks = nn.ModuleList(
            [
                CausalBlock(d, config.num_heads, config.ff_dim)
                for _ in range(config.num_layers)
            ]
        )
        self.output_projection = nn.Linear(d, config.token_dim)
        self.student_log_std = nn.Parameter(
            torch.full((config.action_dim,), float(config.init_log_std))
        )
        nn.init.normal_(self.pos_embedding, std=0.02)

        self.privilege_encoder = None
        self.privilege_pos_embedding = None
        self.teacher_head = None
        self.teacher_log_std = None
        self.value_head = None
        if not deploy:
            if config.needs_privilege:
                self.privilege_encoder = mlp(config.privilege_dim, config.encoder_hidden, d)
                self.privilege_pos_embedding = nn.Parameter(torch.zeros(d))
                nn.init.normal_(self.privilege_pos_embedding, std=0.02)
            if config.use_teacher:
                self.teacher_head = mlp(d, config.teacher_hidden, config.action_dim)
                self.teacher_log_std = nn.Parameter(
                    torch.full((config.action_dim,), float(config.init_log_std))
                )
            self.value_head = mlp(d, config.value_hidden, 1)

    def normalize_tokens(self, tokens):
        m = self.config.obs_dim
        return torch.cat([self.normalizer(tokens[..., :m]), tokens[..., m:]], dim=-1)

    def embed_trajectory(self, tokens):
        """
        h_k = W z_k + P_k for every token of the (normalized) window
        """
        tokens = self.as_tensor(tokens)
        if tokens.shape[-1] != self.config.token_dim:
            raise ConfigurationError(
                "Tokens have {} entries, expected {}".format(
                    tokens.shape[-1], self.config.token_dim
                )
            )
        if tokens.shape[-2] > self.config.window:
            raise ConfigurationError(
                "Window of {} tokens exceeds the configured {}".format(
                    tokens.shape[-2], self.config.window
                )
            )
        length = tokens.shape[-2]
        return self.input_projection(tokens) + self.pos_embedding[:length]

    def encode_privilege(self, privilege):
        if self.privilege_encoder is None:
            raise UsageError("This model has no privilege encoder")
        privilege = self.as_tensor(privilege)
        if privilege.shape[-1] != self.config.privilege_dim:
            raise ConfigurationError(
                "Privilege has {} entries, expected {}".format(
                    privilege.shape[-1], self.config.privilege_dim
                )
            )
        return self.privilege_encoder(privilege) + self.privilege_pos_embedding

    def forward(self, h, h_e=None, lengths=None):
        """
        Run the attention blocks.

        Arguments:
            h {torch.Tensor} -- (B, L, d) embedded proprio tokens
            h_e {torch.Tensor} -- (B, d) encoded privilege token, or None
            lengths {torch.Tensor} -- valid tokens per window (default: all L)

        Returns:
            tuple -- (H_hat (B, L, d), h_e_hat (B, d) or None, attention per layer)
        """
        batch, length = h.shape[0], h.shape[1]
        if lengths is None:
            lengths = torch.full((batch,), length, dtype=torch.long)
        attention = []
        for block in self.blocks:
            h, h_e, weights, weights_e = block(h, h_e, lengths)
            attention.append({"proprio": weights, "privilege": weights_e})
        return h, h_e, attention

    def decode_next(self, hidden, lengths=None):
        """
        z_hat_{k+1} = W_hat h_hat_k for every position; the student mean is
        the action slice of the decode at the last valid position.
        """
        predicted = self.output_projection(hidden)
        batch, length = hidden.shape[0], hidden.shape[1]
        if lengths is None:
            last = torch.full((batch,), length - 1, dtype=torch.long)
        else:
            last = torch.as_tensor(lengths, dtype=torch.long) - 1
        student_mean = predicted[torch.arange(batch), last, self.config.action_slice]
        return predicted, student_mean

    def teacher_and_value(self, privilege_hidden):
        """
        Teacher mean and (privileged) value from the processed privilege token
        """
        if privilege_hidden is None or self.teacher_head is None:
            raise UsageError("Teacher actions need a privilege token and a teacher head")
        value = None
        if self.config.value_from_privilege:
            value = self.value_head(privilege_hidden).squeeze(-1)
        return self.teacher_head(privilege_hidden), value

    def _bounded(self, log_std):
        low, high = self.config.log_std_bounds
        return log_std.clamp(low, high)

    def evaluate(self, tokens, lengths=None, privilege=None):
        """
        Full pass: embedding, attention, decoding and every available head.
        """
        tokens = self.as_tensor(tokens)
        batch, length = tokens.shape[0], tokens.shape[1]
        if lengths is None:
            lengths = torch.full((batch,), length, dtype=torch.long)
        lengths = torch.as_tensor(lengths, dtype=torch.long).clamp(1, length)

        normalized = self.normalize_tokens(tokens)
        h = self.embed_trajectory(normalized)
        h_e = None
        if privilege is not None:
            if self.deploy:
                raise UsageError("A deploy-only model takes no privilege input")
            if self.privilege_encoder is not None:
                h_e = self.encode_privilege(privilege)

        hidden, privilege_hidden, attention = self.forward(h, h_e, lengths)
        predicted, student_mean = self.decode_next(hidden, lengths)
        outputs = PolicyOutputs(
            student_mean=student_mean,
            student_log_std=self._bounded(self.student_log_std),
            predicted_tokens=predicted,
            target_tokens=normalized,
            hidden=hidden,
            privilege_hidden=privilege_hidden,
            attention=attention,
        )
        if self.teacher_head is not None and privilege_hidden is not None:
            outputs.teacher_mean, outputs.value = self.teacher_and_value(privilege_hidden)
            outputs.teacher_log_std = self._bounded(self.teacher_log_std)
        if self.value_head is not None and outputs.value is None:
            if self.config.value_from_privilege:
                if privilege_hidden is not None:
                    outputs.value = self.value_head(privilege_hidden).squeeze(-1)
            else:
                last_hidden = hidden[torch.arange(batch), lengths - 1]
                outputs.value = self.value_head(last_hidden).squeeze(-1)
        return outputs

    def teacher_parameters(self):
        """
        Parameters of the privilege-only path: encoder, teacher head, value
        head and teacher log-std
        """
        params = []
        for module in [self.privilege_encoder, self.teacher_head, self.value_head]:
            if module is not None:
                params += list(module.parameters())
        for p in [self.privilege_pos_embedding, self.teacher_log_std]:
            if p is not None:
                params.append(p)
        return params

    def student_parameters(self):
        teacher = {id(p) for p in self.teacher_parameters()}
        return [p for p in self.parameters() if id(p) not in teacher]


class OraclePolicy(PolicyBase):
    """
    Feed-forward actor-critic over [last observation || privilege]. It acts
    through its teacher head only and is never deployable.
    """

    kind = "oracle"
    deployable = False

    def __init__(self, config, hidden=(256, 128, 64), critic_hidden=(256, 128, 64)):
        super().__init__()
        self.config = config
        self.hidden = list(hidden)
        self.critic_hidden = list(critic_hidden)
        in_dim = config.obs_dim + config.privilege_dim
        self.normalizer = ObservationNormalizer(config.obs_dim, config.normalize_observations)
        self.actor = mlp(in_dim, self.hidden, config.action_dim)
        self.critic = mlp(in_dim, self.critic_hidden, 1)
        self.log_std = nn.Parameter(
            torch.full((config.action_dim,), float(config.init_log_std))
        )

    def evaluate(self, tokens, lengths=None, privilege=None):
        if privilege is None:
            raise UsageError("The oracle consumes privilege at every step")
        tokens = self.as_tensor(tokens)
        batch, length = tokens.shape[0], tokens.shape[1]
        if lengths is None:
            lengths = torch.full((batch,), length, dtype=torch.long)
        lengths = torch.as_tensor(lengths, dtype=torch.long).clamp(1, length)
        last_obs = tokens[torch.arange(batch), lengths - 1, : self.config.obs_dim]
        x = torch.cat([self.normalizer(last_obs), self.as_tensor(privilege)], dim=-1)
        mean = self.actor(x)
        low, high = self.config.log_std_bounds
        log_std = self.log_std.clamp(low, high)
        return PolicyOutputs(
            student_mean=mean,
            student_log_std=log_std,
            teacher_mean=mean,
            teacher_log_std=log_std,
            value=self.critic(x).squeeze(-1),
        )


if __name__ == "__main__":
    print("this is only a module")
