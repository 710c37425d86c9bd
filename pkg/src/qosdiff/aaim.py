"""Adversarial bidirectional-attention interaction model.

The generator consumes a batch of concatenated user-service latent vectors
(real branch) or Gaussian-plus-uniform noise rows (fake branch), runs two
cross-wired attention blocks over the per-row projections, and emits a
sigmoid prediction in (0, 1). The discriminator maps scalar scores to
credibility values in (0, gamma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat
from .layers import (
    BatchNorm1d,
    Dropout,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
)


@dataclass
class InteractionBatch:
    """A mini-batch of interaction rows (B x 2d)."""

    matrix: Tensor
    branch: str                 # "real" | "fake"
    pair_ids: list | None = None


def build_real_batch(users, services, bank, training=False, rng=None):
    """Concatenate refined user and service vectors row-wise."""
    users = np.asarray(users, dtype=np.int64)
    services = np.asarray(services, dtype=np.int64)
    if len(users) != len(services):
        raise ValueError("user and service index lists must match in length")
    zu = bank.refine_users(users, training=training, rng=rng)
    zs = bank.refine_services(services, training=training, rng=rng)
    return InteractionBatch(
        matrix=concat([zu, zs], axis=1),
        branch="real",
        pair_ids=list(zip(users.tolist(), services.tolist())),
    )


def sample_fake(batch_size, d, tau, rng):
    """Gaussian base noise plus a tau-scaled uniform perturbation."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    base = rng.standard_normal((batch_size, 2 * d))
    perturb = rng.uniform(-1.0, 1.0, size=(batch_size, 2 * d))
    return InteractionBatch(matrix=Tensor(base + tau * perturb), branch="fake")


class Generator(Module):
    """Bidirectional hybrid attention over per-row interaction projections.

    Two ReLU projections of the input feed two cross-attention blocks
    (each row is a one-step sequence, so attention collapses to value and
    output projections); their concatenation passes through two
    ReLU+LayerNorm stages and a sigmoid output neuron.
    """

    def __init__(self, d, heads=1, d_h=128, d_g=128, d_o=64, seed=0):
        rng = np.random.default_rng(seed)
        self.proj_us = Linear(2 * d, d_h, rng)
        self.proj_su = Linear(2 * d, d_h, rng)
        self.attn_us = MultiHeadAttention(d_h, heads, rng)
        self.attn_su = MultiHeadAttention(d_h, heads, rng)
        self.fc1 = Linear(2 * d_h, d_g, rng)
        self.norm1 = LayerNorm(d_g)
        self.fc2 = Linear(d_g, d_o, rng)
        self.norm2 = LayerNorm(d_o)
        self.out = Linear(d_o, 1, rng)

    def __call__(self, batch, training=False):
        x = batch.matrix if isinstance(batch, InteractionBatch) else batch
        h_us = self.proj_us(x).relu()
        h_su = self.proj_su(x).relu()
        a_us = self.attn_us(h_us, h_us, h_su)
        a_su = self.attn_su(h_su, h_su, h_us)
        g = concat([a_us, a_su], axis=1)
        g1 = self.norm1(self.fc1(g).relu())
        g2 = self.norm2(self.fc2(g1).relu())
        y = self.out(g2).sigmoid()
        self._check_finite(y, "generator output")
        return y

    @staticmethod
    def _check_finite(t, stage):
        if not np.isfinite(t.data).all():
            raise FloatingPointError(f"non-finite values at {stage}")


class Discriminator(Module):
    """Scalar-score critic: two LeakyReLU+BatchNorm+Dropout blocks, then
    a sigmoid output scaled by gamma."""

    def __init__(self, d_d=64, gamma=1.0, leaky_slope=0.2, keep_prob=0.7,
                 seed=0):
        rng = np.random.default_rng(seed)
        self.gamma = gamma
        self.leaky_slope = leaky_slope
        self.fc1 = Linear(1, d_d, rng)
        self.bn1 = BatchNorm1d(d_d)
        self.drop1 = Dropout(keep_prob)
        self.fc2 = Linear(d_d, d_d, rng)
        self.bn2 = BatchNorm1d(d_d)
        self.drop2 = Dropout(keep_prob)
        self.out = Linear(d_d, 1, rng)

    def __call__(self, scores, training=False, rng=None):
        h = self.fc1(scores).leaky_relu(self.leaky_slope)
        h = self.drop1(self.bn1(h, training), training, rng)
        h = self.fc2(h).leaky_relu(self.leaky_slope)
        h = self.drop2(self.bn2(h, training), training, rng)
        return self.out(h).sigmoid() * self.gamma


@dataclass
class ForwardOutputs:
    """The four per-batch outputs of one adversarial forward pass."""

    y_real: Tensor
    y_fake: Tensor
    d_real: Tensor
    d_fake: Tensor


def aaim_forward(generator, discriminator, users, services, bank, tau,
                 rng, training=False):
    """Full forward pass: generator on real and fake branches, then the
    discriminator on both prediction vectors."""
    real = build_real_batch(users, services, bank, training=training, rng=rng)
    fake = sample_fake(len(real.pair_ids), bank.d, tau, rng)
    y_real = generator(real, training=training)
    y_fake = generator(fake, training=training)
    d_real = discriminator(y_real, training=training, rng=rng)
    d_fake = discriminator(y_fake, training=training, rng=rng)
    return ForwardOutputs(y_real=y_real, y_fake=y_fake,
                          d_real=d_real, d_fake=d_fake)
