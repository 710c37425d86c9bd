"""Full prediction model: embedding bank + generator + discriminator."""

from __future__ import annotations

import numpy as np

from .aaim import Discriminator, Generator, build_real_batch
from .autodiff import no_grad
from .delm import EmbeddingBank


class QoSDiffModel:
    """Bundles the trainable components and exposes evaluation-mode
    prediction plus the generator/discriminator parameter partition."""

    def __init__(self, ds, d=256, heads=1, d_h=128, d_g=128, d_o=64,
                 d_d=64, tau=0.5, gamma=1.0, leaky_slope=0.2,
                 dropout_keep=0.7, seed=0):
        self.d = d
        self.tau = tau
        seeds = np.random.SeedSequence(seed).generate_state(3)
        self.bank = EmbeddingBank(
            m=ds.m, n=ds.n, d=d, heads=heads,
            user_context=ds.user_context,
            service_context=ds.service_context,
            user_vocab_sizes=ds.user_vocab_sizes,
            service_vocab_sizes=ds.service_vocab_sizes,
            seed=int(seeds[0]),
        )
        self.generator = Generator(
            d=d, heads=heads, d_h=d_h, d_g=d_g, d_o=d_o, seed=int(seeds[1])
        )
        self.discriminator = Discriminator(
            d_d=d_d, gamma=gamma, leaky_slope=leaky_slope,
            keep_prob=dropout_keep, seed=int(seeds[2]),
        )

    # ------------------------------------------------------------------
    def generator_parameters(self):
        """Embedding/denoiser plus generator parameters (the G step)."""
        return self.bank.parameters() + self.generator.parameters()

    def discriminator_parameters(self):
        return self.discriminator.parameters()

    def all_parameters(self):
        return self.generator_parameters() + self.discriminator_parameters()

    def zero_grads(self):
        for p in self.all_parameters():
            p.grad = None

    # ------------------------------------------------------------------
    def predict(self, users, services, batch_size=8192):
        """Evaluation-mode normalized predictions for (user, service) pairs."""
        users = np.asarray(users, dtype=np.int64)
        services = np.asarray(services, dtype=np.int64)
        out = np.empty(len(users))
        with no_grad():
            for lo in range(0, len(users), batch_size):
                hi = min(lo + batch_size, len(users))
                batch = build_real_batch(
                    users[lo:hi], services[lo:hi], self.bank
                )
                out[lo:hi] = self.generator(batch).data.ravel()
        return out

    # ------------------------------------------------------------------
    def state_dict(self):
        state = {}
        for prefix, module in (
            ("bank", self.bank),
            ("generator", self.generator),
            ("discriminator", self.discriminator),
        ):
            for name, p in module.named_parameters(prefix=f"{prefix}."):
                state[name] = p.data.copy()
            for name, b in module.named_buffers(prefix=f"{prefix}.buf."):
                state[name] = b.copy()
        return state

    def load_state_dict(self, state):
        for prefix, module in (
            ("bank", self.bank),
            ("generator", self.generator),
            ("discriminator", self.discriminator),
        ):
            for name, p in module.named_parameters(prefix=f"{prefix}."):
                p.data = state[name].copy()
            for name, b in module.named_buffers(prefix=f"{prefix}.buf."):
                b[...] = state[name]
