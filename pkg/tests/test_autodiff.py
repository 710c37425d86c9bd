import numpy as np
import pytest

from conftest import assert_grads_match, rand_tensor
from qosdiff.autodiff import AdamW, Tensor, concat, no_grad


# ----------------------------------------------------------------------
# forward definitions
# ----------------------------------------------------------------------
def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    eye = Tensor(np.eye(2))
    np.testing.assert_array_equal((a @ eye).data, a.data)


def test_matmul_shape_error():
    with pytest.raises(ValueError, match="mismatch"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_relu_definition():
    x = Tensor([-1.0, 0.0, 2.0])
    np.testing.assert_array_equal(x.relu().data, [0.0, 0.0, 2.0])


def test_softmax_singleton_axis_is_one():
    x = Tensor(np.array([[3.7]]))
    assert x.softmax(axis=1).data[0, 0] == 1.0


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((4, 5)))
    np.testing.assert_allclose(x.softmax(axis=1).data.sum(axis=1), 1.0)


# ----------------------------------------------------------------------
# backward basics
# ----------------------------------------------------------------------
def test_backward_square_sum():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_backward_bce_at_zero():
    # -log(sigmoid(x)) at x=0 has gradient sigmoid(0) - 1 = -0.5
    x = Tensor([0.0], requires_grad=True)
    (-(x.sigmoid().log())).sum().backward()
    np.testing.assert_allclose(x.grad, [-0.5])


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * x).backward()


def test_backward_accumulates_without_reset():
    x = Tensor([1.0, 2.0], requires_grad=True)
    (x * x).sum().backward()
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, [4.0, 8.0])


def test_no_grad_disables_recording():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = (x * x).sum()
    assert not y.requires_grad


# ----------------------------------------------------------------------
# gradient checks against central finite differences
# ----------------------------------------------------------------------
PRIMITIVES = [
    ("add", lambda a, b: (a + b)),
    ("sub", lambda a, b: (a - b)),
    ("mul", lambda a, b: (a * b)),
    ("div", lambda a, b: a / (b * b + 1.0)),
    ("matmul", lambda a, b: a @ b.T),
    ("relu", lambda a, b: (a + b).relu()),
    ("leaky_relu", lambda a, b: (a + b).leaky_relu(0.2)),
    ("sigmoid", lambda a, b: (a * b).sigmoid()),
    ("exp", lambda a, b: (a - b).exp()),
    ("log", lambda a, b: ((a * a) + (b * b) + 1.0).log()),
    ("sqrt", lambda a, b: ((a * a) + (b * b) + 1.0).sqrt()),
    ("softmax", lambda a, b: (a + b).softmax(axis=1)),
    ("concat", lambda a, b: concat([a, b], axis=1)),
    ("mean", lambda a, b: (a * b).mean(axis=0, keepdims=True)),
    ("pow", lambda a, b: (a + b) ** 3),
    ("transpose", lambda a, b: a.T @ b),
    ("slice", lambda a, b: (a * b).slice_cols(1, 3)),
]


@pytest.mark.parametrize("name,op", PRIMITIVES, ids=[p[0] for p in PRIMITIVES])
def test_primitive_gradients(name, op):
    import zlib

    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(5):
        a = rand_tensor(rng, 3, 4)
        b = rand_tensor(rng, 3, 4)
        assert_grads_match(lambda: (op(a, b) * op(a, b)).sum(), [a, b])


def test_gather_rows_gradient():
    rng = np.random.default_rng(7)
    table = rand_tensor(rng, 5, 3)
    idx = np.array([0, 2, 2, 4])

    assert_grads_match(
        lambda: (table.gather_rows(idx) ** 2).sum(), [table]
    )


def test_clip_gradient_zero_outside_range():
    x = Tensor([-2.0, 0.5, 2.0], requires_grad=True)
    x.clip(0.0, 1.0).sum().backward()
    np.testing.assert_allclose(x.grad, [0.0, 1.0, 0.0])


# ----------------------------------------------------------------------
# optimizer
# ----------------------------------------------------------------------
def test_adamw_zero_grad_zero_decay_keeps_parameter():
    p = Tensor([1.0, -2.0], requires_grad=True)
    opt = AdamW([p], lr=0.1, weight_decay=0.0)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adamw_first_step_opposes_gradient():
    p = Tensor([1.0, 1.0], requires_grad=True)
    opt = AdamW([p], lr=0.1, weight_decay=0.0)
    p.grad = np.array([0.5, -0.3])
    before = p.data.copy()
    opt.step()
    delta = p.data - before
    assert np.all(np.sign(delta) == -np.sign([0.5, -0.3]))


def test_adamw_missing_grad_raises():
    p = Tensor([1.0], requires_grad=True)
    opt = AdamW([p])
    with pytest.raises(ValueError, match="no gradient"):
        opt.step()


def test_adamw_zeroes_grads_after_step():
    p = Tensor([1.0], requires_grad=True)
    opt = AdamW([p], lr=0.1)
    p.grad = np.array([1.0])
    opt.step()
    assert p.grad is None


def test_adamw_converges_on_quadratic():
    w = Tensor([0.0], requires_grad=True)
    opt = AdamW([w], lr=0.1, weight_decay=0.0)
    for _ in range(500):
        loss = ((w - 3.0) * (w - 3.0)).sum()
        loss.backward()
        opt.step()
        if abs(w.data[0] - 3.0) < 1e-3:
            break
    assert abs(w.data[0] - 3.0) < 1e-3
