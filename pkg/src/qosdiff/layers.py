"""Neural building blocks on top of the autodiff substrate.

All layers operate on batches of row vectors (shape ``B x dim``) and are
built from recorded primitives, so gradients come for free. Initialization
of projection weights uses the same variance-2/d Gaussian scheme as the
embedding tables, for consistency.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat


class Module:
    """Minimal parameter container with recursive collection."""

    def parameters(self):
        params = []
        for value in vars(self).values():
            if isinstance(value, Tensor) and value.requires_grad:
                params.append(value)
            elif isinstance(value, Module):
                params.extend(value.parameters())
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        params.extend(item.parameters())
                    elif isinstance(item, Tensor) and item.requires_grad:
                        params.append(item)
        return params

    def named_parameters(self, prefix=""):
        out = []
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                out.append((key, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(prefix=f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(prefix=f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out.append((f"{key}.{i}", item))
        return out

    def named_buffers(self, prefix=""):
        """Non-trainable numpy buffers (e.g. batch-norm running stats)."""
        out = []
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, np.ndarray) and value.dtype.kind == "f":
                out.append((key, value))
            elif isinstance(value, Module):
                out.extend(value.named_buffers(prefix=f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_buffers(prefix=f"{key}.{i}."))
        return out


def gaussian_weights(rng, rows, cols, d=None):
    """Zero-mean Gaussian with variance 2/d (d defaults to fan-in)."""
    scale = np.sqrt(2.0 / (d if d is not None else cols))
    return rng.standard_normal((rows, cols)) * scale


class Linear(Module):
    """Affine map ``x @ W.T + b`` for row batches."""

    def __init__(self, in_dim, out_dim, rng):
        self.weight = Tensor(gaussian_weights(rng, out_dim, in_dim), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x):
        return x @ self.weight.T + self.bias


class LayerNorm(Module):
    """Per-row normalization with learnable gain (init 1) and bias (init 0)."""

    def __init__(self, dim, eps=1e-8):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        normed = centered / (var + self.eps).sqrt()
        return normed * self.gain + self.bias


class BatchNorm1d(Module):
    """Batch normalization over the batch axis with running statistics.

    Training mode uses batch statistics (and rejects batches of size 1,
    where they are undefined); evaluation mode uses the running buffers.
    """

    def __init__(self, dim, momentum=0.1, eps=1e-5):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def __call__(self, x, training):
        if training:
            if x.shape[0] < 2:
                raise ValueError(
                    "batch normalization needs batch size >= 2 in training mode"
                )
            mu = x.mean(axis=0, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=0, keepdims=True)
            self.running_mean = (
                (1.0 - self.momentum) * self.running_mean
                + self.momentum * mu.data.ravel()
            )
            self.running_var = (
                (1.0 - self.momentum) * self.running_var
                + self.momentum * var.data.ravel()
            )
            normed = centered / (var + self.eps).sqrt()
        else:
            normed = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return normed * self.gain + self.bias


class Dropout(Module):
    """Inverted-scaling dropout; identity in evaluation mode."""

    def __init__(self, keep_prob=0.7):
        if not 0.0 < keep_prob <= 1.0:
            raise ValueError("keep probability must lie in (0, 1]")
        self.keep_prob = keep_prob

    def __call__(self, x, training, rng=None):
        if not training or self.keep_prob == 1.0:
            return x
        mask = (rng.random(x.shape) < self.keep_prob) / self.keep_prob
        return x * Tensor(mask)


class MultiHeadAttention(Module):
    """Multi-head attention over one-step sequences (one row per item).

    Query, key and value are linear projections of their inputs. With
    sequence length 1 the per-head softmax weight is exactly 1, so the
    output collapses to the output projection applied to the value
    projection; the query/key paths are retained for structural fidelity
    but receive zero gradient.
    """

    def __init__(self, dim, heads, rng):
        if dim % heads != 0:
            raise ValueError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(dim, dim, rng)
        self.v_proj = Linear(dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng)

    def __call__(self, query, key, value):
        q = self.q_proj(query)
        k = self.k_proj(key)
        v = self.v_proj(value)
        outs = []
        for h in range(self.heads):
            lo, hi = h * self.head_dim, (h + 1) * self.head_dim
            qh = q.slice_cols(lo, hi)
            kh = k.slice_cols(lo, hi)
            vh = v.slice_cols(lo, hi)
            score = (qh * kh).sum(axis=1, keepdims=True) * (
                1.0 / np.sqrt(self.head_dim)
            )
            weight = score.softmax(axis=1)  # length-1 sequence: exactly 1
            outs.append(vh * weight)
        merged = outs[0] if len(outs) == 1 else concat(outs, axis=1)
        return self.out_proj(merged)

    def collapsed_matrices(self):
        """Equivalent (weight, bias) of the attention block on singletons.

        Returns W, b with output = x @ W + b, exploiting the singleton
        softmax: attention reduces to out_proj(v_proj(x)).
        """
        wv, bv = self.v_proj.weight.data, self.v_proj.bias.data
        wo, bo = self.out_proj.weight.data, self.out_proj.bias.data
        w = wv.T @ wo.T
        b = bv @ wo.T + bo
        return w, b
