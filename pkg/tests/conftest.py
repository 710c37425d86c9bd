import os

import numpy as np
import pytest

from qosdiff.autodiff import Tensor
from qosdiff.data import QoSDataset, normalize


def central_difference(f, arrays, h=1e-5):
    """Numerical gradient of scalar f() w.r.t. each array, by central
    differences. f must be a pure function of the current array contents."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = f()
            flat[k] = orig - h
            fm = f()
            flat[k] = orig
            gflat[k] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def assert_grads_match(build_loss, params, rtol=1e-4):
    """Compare reverse-mode gradients of build_loss() against central
    finite differences on every parameter tensor."""
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    numeric = central_difference(
        lambda: build_loss().item(), [p.data for p in params]
    )
    for a, n in zip(analytic, numeric):
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        err = np.max(np.abs(a - n) / denom)
        assert err < rtol, f"gradient mismatch: max relative error {err}"
    for p in params:
        p.grad = None


def rand_tensor(rng, *shape, requires_grad=True):
    return Tensor(rng.standard_normal(shape), requires_grad=requires_grad)


def toy_dataset(m=6, n=8, p=1, q=2, seed=0, density=0.9):
    """Small dense-ish dataset with context attributes."""
    rng = np.random.default_rng(seed)
    mask = rng.random((m, n)) < density
    if not mask.any():
        mask[0, 0] = True
    values = rng.uniform(0.1, 5.0, size=(m, n)) * mask
    ui, si = np.nonzero(mask)
    user_vocab = [4] * p
    service_vocab = [3] * q
    return QoSDataset(
        m=m, n=n, users=ui, services=si, values=values[ui, si],
        global_max=float(values.max()),
        user_context=rng.integers(1, 4, size=(m, p)),
        service_context=rng.integers(1, 3, size=(n, q)),
        user_vocab_sizes=user_vocab, service_vocab_sizes=service_vocab,
        user_field_names=[f"u{k}" for k in range(p)],
        service_field_names=[f"s{k}" for k in range(q)],
    )


@pytest.fixture
def small_ds():
    return normalize(toy_dataset())


def wsdream_paths():
    """Locate a WS-DREAM dataset#1 directory, if one is available.

    Expects QOSDIFF_WSDREAM_DIR to contain rtMatrix.txt, userlist.txt and
    wslist.txt.
    """
    root = os.environ.get("QOSDIFF_WSDREAM_DIR")
    if not root:
        return None
    paths = {
        "matrix": os.path.join(root, "rtMatrix.txt"),
        "users": os.path.join(root, "userlist.txt"),
        "services": os.path.join(root, "wslist.txt"),
    }
    if all(os.path.exists(p) for p in paths.values()):
        return paths
    return None


requires_wsdream = pytest.mark.skipif(
    wsdream_paths() is None,
    reason="WS-DREAM dataset not available (set QOSDIFF_WSDREAM_DIR)",
)
