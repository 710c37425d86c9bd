"""Classical reference predictors: UPCC, IPCC, UIPCC, PMF and BiasMF.

All models consume the shared dataset/split containers and predict on the
normalized scale; metric computation clamps predictions to [0, 1].
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .kernels import pearson_pair  # re-exported scalar Pearson

__all__ = [
    "pearson_pair",
    "NeighborModel",
    "uipcc_predict",
    "FactorModel",
    "factor_fit",
]


def _dense_matrix(ds, split):
    """Dense (values, mask) training matrix from split train triplets."""
    values = np.zeros((ds.m, ds.n))
    mask = np.zeros((ds.m, ds.n), dtype=bool)
    idx = split.train
    values[ds.users[idx], ds.services[idx]] = ds.values[idx]
    mask[ds.users[idx], ds.services[idx]] = True
    return values, mask


class NeighborModel:
    """Pearson top-k neighborhood predictor over users or services."""

    def __init__(self, kind="user", top_k=10):
        if kind not in ("user", "service"):
            raise ValueError("kind must be 'user' or 'service'")
        self.kind = kind
        self.top_k = top_k
        self.values = None
        self.mask = None
        self.sim = None
        self.neighbors = None
        self.row_means = None

    def fit(self, ds, split):
        values, mask = _dense_matrix(ds, split)
        if self.kind == "service":
            values, mask = values.T.copy(), mask.T.copy()
        self.values, self.mask = values, mask
        counts = mask.sum(axis=1)
        sums = values.sum(axis=1)
        observed = counts > 0
        global_mean = sums.sum() / counts.sum()
        self.row_means = np.where(observed, sums / np.maximum(counts, 1),
                                  global_mean)
        self.sim = kernels.pearson_matrix(values, mask)
        self.neighbors = kernels.top_k_neighbors(self.sim, self.top_k)
        return self

    def predict_many(self, users, services):
        if self.sim is None:
            raise RuntimeError("model is not fitted")
        rows, cols = (users, services) if self.kind == "user" else (services, users)
        return kernels.neighbor_predict(
            rows, cols, self.values, self.mask, self.sim,
            self.neighbors, self.row_means,
        )

    def predict(self, i, j):
        return float(self.predict_many(np.array([i]), np.array([j]))[0])


def uipcc_predict(user_model, service_model, users, services, weight=0.5):
    """Convex mix of the user-based and service-based predictions."""
    up = user_model.predict_many(users, services)
    ip = service_model.predict_many(users, services)
    return weight * up + (1.0 - weight) * ip


class FactorModel:
    """Latent-factor model, optionally with user/service/global biases."""

    def __init__(self, user_factors, service_factors, user_bias,
                 service_bias, global_mean, use_bias):
        self.user_factors = user_factors
        self.service_factors = service_factors
        self.user_bias = user_bias
        self.service_bias = service_bias
        self.global_mean = global_mean
        self.use_bias = use_bias

    def predict_many(self, users, services):
        dot = np.einsum(
            "bf,bf->b", self.user_factors[users], self.service_factors[services]
        )
        if self.use_bias:
            return (self.global_mean + self.user_bias[users]
                    + self.service_bias[services] + dot)
        return dot

    def predict(self, i, j):
        return float(self.predict_many(np.array([i]), np.array([j]))[0])


def factor_fit(ds, split, variant="pmf", factors=10, lr=0.01, reg=0.01,
               epochs=100, seed=0):
    """SGD factorization of the training triplets.

    ``variant='pmf'`` fits plain inner products; ``'biasmf'`` adds user,
    service and global bias terms. Raises on divergence.
    """
    if variant not in ("pmf", "biasmf"):
        raise ValueError(f"unknown variant {variant!r}")
    use_bias = variant == "biasmf"
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((ds.m, factors)) * 0.1
    q = rng.standard_normal((ds.n, factors)) * 0.1
    bu = np.zeros(ds.m)
    bs = np.zeros(ds.n)
    idx = split.train[rng.permutation(len(split.train))]
    users, services = ds.users[idx], ds.services[idx]
    values = ds.values[idx]
    mu = float(values.mean()) if use_bias else 0.0
    final = kernels.sgd_factorize(
        users, services, values, p, q, bu, bs, mu, lr, reg, epochs, use_bias
    )
    if final < 0:
        raise FloatingPointError(
            "factorization diverged (squared error above 1e6); "
            "try a smaller learning rate"
        )
    return FactorModel(p, q, bu, bs, mu, use_bias)
