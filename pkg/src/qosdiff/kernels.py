"""Hot numeric kernels for the classical baselines.

Each kernel has a numba ``@njit`` implementation and a pure-numpy
fallback. Selection: numba is used when importable unless the environment
variable ``QOSDIFF_NUMBA`` is set to ``0``. ``benchmarks/bench_kernels.py``
compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


def numba_enabled():
    return HAVE_NUMBA and os.environ.get("QOSDIFF_NUMBA", "1") != "0"


# ----------------------------------------------------------------------
# Pearson similarity over co-observed entries
# ----------------------------------------------------------------------
def pearson_pair(a, b):
    """Pearson coefficient of two aligned co-observed value vectors.

    Returns 0 for fewer than two points or zero variance on either side.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2:
        return 0.0
    ac = a - a.mean()
    bc = b - b.mean()
    va, vb = (ac * ac).sum(), (bc * bc).sum()
    if va <= 0 or vb <= 0:
        return 0.0
    return float((ac * bc).sum() / np.sqrt(va * vb))


@njit(cache=True, parallel=True)
def _pearson_matrix_numba(values, mask):
    rows = values.shape[0]
    cols = values.shape[1]
    sim = np.zeros((rows, rows))
    for a in prange(rows):
        for b in range(a, rows):
            n = 0
            sx = 0.0
            sy = 0.0
            sxx = 0.0
            syy = 0.0
            sxy = 0.0
            for c in range(cols):
                if mask[a, c] and mask[b, c]:
                    x = values[a, c]
                    y = values[b, c]
                    n += 1
                    sx += x
                    sy += y
                    sxx += x * x
                    syy += y * y
                    sxy += x * y
            if n >= 2:
                cov = n * sxy - sx * sy
                vx = n * sxx - sx * sx
                vy = n * syy - sy * sy
                if vx > 0.0 and vy > 0.0:
                    r = cov / np.sqrt(vx * vy)
                    if r > 1.0:
                        r = 1.0
                    elif r < -1.0:
                        r = -1.0
                    sim[a, b] = r
                    sim[b, a] = r
    return sim


def _pearson_matrix_numpy(values, mask):
    x = values * mask
    xx = x * x
    mt = mask.astype(np.float64)
    n = mt @ mt.T
    sx = x @ mt.T
    sy = sx.T
    sxx = xx @ mt.T
    syy = sxx.T
    sxy = x @ x.T
    cov = n * sxy - sx * sy
    vx = n * sxx - sx * sx
    vy = n * syy - sy * sy
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = cov / np.sqrt(vx * vy)
    sim[(n < 2) | (vx <= 0) | (vy <= 0)] = 0.0
    np.clip(sim, -1.0, 1.0, out=sim)
    return sim


def pearson_matrix(values, mask, use_numba=None):
    """Row-by-row Pearson similarity over co-observed columns.

    Pairs with fewer than two co-observations or degenerate variance get
    similarity 0 (including the diagonal of constant rows).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if use_numba is None:
        use_numba = numba_enabled()
    if use_numba:
        return _pearson_matrix_numba(values, mask)
    return _pearson_matrix_numpy(values, mask)


# ----------------------------------------------------------------------
# top-k neighborhood prediction
# ----------------------------------------------------------------------
def top_k_neighbors(sim, k):
    """Per-row indices of the k most similar peers with positive similarity.

    Rows are padded with -1; the entity itself is excluded.
    """
    rows = sim.shape[0]
    out = np.full((rows, k), -1, dtype=np.int64)
    masked = sim.copy()
    np.fill_diagonal(masked, -np.inf)
    order = np.argsort(-masked, axis=1, kind="stable")
    for a in range(rows):
        count = 0
        for b in order[a]:
            if count == k:
                break
            if masked[a, b] <= 0.0:
                break  # sorted descending: nothing positive remains
            out[a, count] = b
            count += 1
    return out


@njit(cache=True)
def _neighbor_predict_numba(rows, cols, values, mask, sim, neighbors,
                            row_means):
    out = np.empty(len(rows))
    for t in range(len(rows)):
        i = rows[t]
        j = cols[t]
        num = 0.0
        den = 0.0
        for idx in range(neighbors.shape[1]):
            v = neighbors[i, idx]
            if v < 0:
                break
            if mask[v, j]:
                w = sim[i, v]
                num += w * (values[v, j] - row_means[v])
                den += abs(w)
        if den > 0.0:
            out[t] = row_means[i] + num / den
        else:
            out[t] = row_means[i]
    return out


def _neighbor_predict_numpy(rows, cols, values, mask, sim, neighbors,
                            row_means):
    out = np.empty(len(rows))
    for t in range(len(rows)):
        i, j = rows[t], cols[t]
        cand = neighbors[i]
        cand = cand[cand >= 0]
        cand = cand[mask[cand, j]]
        if len(cand):
            w = sim[i, cand]
            den = np.abs(w).sum()
            if den > 0:
                out[t] = row_means[i] + (
                    w * (values[cand, j] - row_means[cand])
                ).sum() / den
                continue
        out[t] = row_means[i]
    return out


def neighbor_predict(rows, cols, values, mask, sim, neighbors, row_means,
                     use_numba=None):
    """Mean-centered weighted aggregation over qualifying top-k neighbors."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    sim = np.ascontiguousarray(sim, dtype=np.float64)
    row_means = np.ascontiguousarray(row_means, dtype=np.float64)
    if use_numba is None:
        use_numba = numba_enabled()
    fn = _neighbor_predict_numba if use_numba else _neighbor_predict_numpy
    return fn(rows, cols, values, mask, sim, neighbors, row_means)


# ----------------------------------------------------------------------
# SGD matrix factorization
# ----------------------------------------------------------------------
@njit(cache=True)
def _sgd_epochs_numba(users, services, values, p, q, bu, bs, mu, lr, reg,
                      epochs, use_bias):
    f = p.shape[1]
    for _ in range(epochs):
        sq_err = 0.0
        for t in range(len(users)):
            i = users[t]
            j = services[t]
            dot = 0.0
            for a in range(f):
                dot += p[i, a] * q[j, a]
            if use_bias:
                pred = mu + bu[i] + bs[j] + dot
            else:
                pred = dot
            err = pred - values[t]
            sq_err += err * err
            if use_bias:
                bu[i] -= lr * (err + reg * bu[i])
                bs[j] -= lr * (err + reg * bs[j])
            for a in range(f):
                pa = p[i, a]
                p[i, a] -= lr * (err * q[j, a] + reg * pa)
                q[j, a] -= lr * (err * pa + reg * q[j, a])
        if sq_err / len(users) > 1e6 or np.isnan(sq_err):
            return -1.0
    return sq_err / len(users)


def _sgd_epochs_numpy(users, services, values, p, q, bu, bs, mu, lr, reg,
                      epochs, use_bias):
    sq_err = 0.0
    for _ in range(epochs):
        sq_err = 0.0
        for t in range(len(users)):
            i, j = users[t], services[t]
            dot = p[i] @ q[j]
            pred = mu + bu[i] + bs[j] + dot if use_bias else dot
            err = pred - values[t]
            sq_err += err * err
            if use_bias:
                bu[i] -= lr * (err + reg * bu[i])
                bs[j] -= lr * (err + reg * bs[j])
            pi = p[i].copy()
            p[i] -= lr * (err * q[j] + reg * pi)
            q[j] -= lr * (err * pi + reg * q[j])
        if sq_err / len(users) > 1e6 or np.isnan(sq_err):
            return -1.0
    return sq_err / len(users)


def sgd_factorize(users, services, values, p, q, bu, bs, mu, lr, reg,
                  epochs, use_bias, use_numba=None):
    """In-place SGD on squared error with L2 regularization.

    Returns the final epoch's mean squared training error, or -1.0 on
    divergence (mean squared error above 1e6).
    """
    users = np.ascontiguousarray(users, dtype=np.int64)
    services = np.ascontiguousarray(services, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if use_numba is None:
        use_numba = numba_enabled()
    fn = _sgd_epochs_numba if use_numba else _sgd_epochs_numpy
    return fn(users, services, values, p, q, bu, bs, mu, lr, reg,
              epochs, use_bias)
