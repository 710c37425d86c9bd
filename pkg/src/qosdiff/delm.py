"""Diffusion-refined embedding learning.

Identity and per-attribute embedding tables are initialized from a
zero-mean Gaussian with variance 2/d, which is interpreted as one forward
diffusion step away from an ideal representation. Each table has its own
attention-based noise predictor; a single reverse step reconstructs the
ideal component, and the per-entity components are summed and
layer-normalized into the final latent vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .layers import LayerNorm, Linear, Module, MultiHeadAttention


@dataclass(frozen=True)
class DiffusionSchedule:
    """Single-step noise schedule calibrated to variance-2/d initialization."""

    d: int

    def __post_init__(self):
        if self.d <= 2:
            raise ValueError("schedule degenerate: alpha1 <= 0 for d <= 2")

    @property
    def beta1(self):
        return 2.0 / self.d

    @property
    def alpha1(self):
        return 1.0 - 2.0 / self.d


def kaiming_init(rows, d, seed):
    """i.i.d. Gaussian table with mean 0 and variance 2/d."""
    if d <= 2:
        raise ValueError("schedule degenerate: alpha1 <= 0 for d <= 2")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, d)) * np.sqrt(2.0 / d)


class DenoiserNet(Module):
    """Self-attention noise predictor: Linear(MHA(x, x, x))."""

    def __init__(self, d, heads, rng):
        self.attention = MultiHeadAttention(d, heads, rng)
        self.linear = Linear(d, d, rng)

    def __call__(self, x):
        return self.linear(self.attention(x, x, x))


def predict_noise(net, e):
    """Estimated noise component of a batch of embedding rows."""
    return net(e)


def single_step_reconstruct(e, net, sched, z=None):
    """One reverse diffusion step on a batch of embedding rows.

    ``(e - sqrt(beta1) * predicted_noise) / sqrt(alpha1) + sqrt(beta1) * z``
    where ``z`` is standard Gaussian during training and zero (None) at
    evaluation.
    """
    eps_hat = predict_noise(net, e)
    out = (e - eps_hat * np.sqrt(sched.beta1)) * (1.0 / np.sqrt(sched.alpha1))
    if z is not None:
        out = out + Tensor(np.sqrt(sched.beta1) * z)
    return out


class EmbeddingBank(Module):
    """All embedding tables with their attached denoiser networks.

    One table (and one denoiser) per user/service identity plus one per
    context attribute field; refinement sums the reconstructed components
    per entity and layer-normalizes the result.
    """

    def __init__(self, m, n, d, heads, user_context, service_context,
                 user_vocab_sizes, service_vocab_sizes, seed):
        self.d = d
        self.schedule = DiffusionSchedule(d)
        self.user_context = np.asarray(user_context, dtype=np.int64)
        self.service_context = np.asarray(service_context, dtype=np.int64)

        seeds = np.random.SeedSequence(seed).spawn(
            2 + len(user_vocab_sizes) + len(service_vocab_sizes) + 1
        )
        net_rng = np.random.default_rng(seeds[-1])

        self.user_id_table = Tensor(
            kaiming_init(m, d, seeds[0]), requires_grad=True
        )
        self.service_id_table = Tensor(
            kaiming_init(n, d, seeds[1]), requires_grad=True
        )
        self.user_attr_tables = [
            Tensor(kaiming_init(v, d, s), requires_grad=True)
            for v, s in zip(user_vocab_sizes, seeds[2:2 + len(user_vocab_sizes)])
        ]
        self.service_attr_tables = [
            Tensor(kaiming_init(v, d, s), requires_grad=True)
            for v, s in zip(
                service_vocab_sizes, seeds[2 + len(user_vocab_sizes):-1]
            )
        ]

        self.user_id_denoiser = DenoiserNet(d, heads, net_rng)
        self.user_attr_denoisers = [
            DenoiserNet(d, heads, net_rng) for _ in user_vocab_sizes
        ]
        self.service_id_denoiser = DenoiserNet(d, heads, net_rng)
        self.service_attr_denoisers = [
            DenoiserNet(d, heads, net_rng) for _ in service_vocab_sizes
        ]
        self.user_norm = LayerNorm(d)
        self.service_norm = LayerNorm(d)

    # ------------------------------------------------------------------
    def _refine_side(self, indices, id_table, id_denoiser, context,
                     attr_tables, attr_denoisers, norm, table_label,
                     training, rng):
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        batch = len(indices)

        def noise():
            if training:
                if rng is None:
                    raise ValueError("training-mode refinement needs an rng")
                return rng.standard_normal((batch, self.d))
            return None

        component = single_step_reconstruct(
            id_table.gather_rows(indices), id_denoiser, self.schedule, noise()
        )
        total = component
        for k, (table, denoiser) in enumerate(zip(attr_tables, attr_denoisers)):
            attr_idx = context[indices, k]
            refined = single_step_reconstruct(
                table.gather_rows(attr_idx), denoiser, self.schedule, noise()
            )
            total = total + refined
        if not np.isfinite(total.data).all():
            raise FloatingPointError(
                f"non-finite refined embedding in {table_label} tables"
            )
        return norm(total)

    def refine_users(self, indices, training=False, rng=None):
        """Refined latent vectors for a batch of user indices (B x d)."""
        return self._refine_side(
            indices, self.user_id_table, self.user_id_denoiser,
            self.user_context, self.user_attr_tables,
            self.user_attr_denoisers, self.user_norm, "user",
            training, rng,
        )

    def refine_services(self, indices, training=False, rng=None):
        """Refined latent vectors for a batch of service indices (B x d)."""
        return self._refine_side(
            indices, self.service_id_table, self.service_id_denoiser,
            self.service_context, self.service_attr_tables,
            self.service_attr_denoisers, self.service_norm, "service",
            training, rng,
        )

    def refine_user(self, i, training=False, rng=None):
        """Single-entity convenience wrapper (returns a 1 x d tensor)."""
        return self.refine_users([i], training=training, rng=rng)

    def refine_service(self, j, training=False, rng=None):
        return self.refine_services([j], training=training, rng=rng)
