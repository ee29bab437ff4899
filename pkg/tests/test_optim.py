import numpy as np
import pytest

from fsru import tensor as T
from fsru.optim import Adam
from fsru.tensor import Tensor

# f(a, b) = a^2 + 3 b^2 from (1, -2), lr 0.1; three Adam steps worked out by hand
HAND_STEPS = [
    (0.9000000005, -1.9000000000833333),
    (0.8004122286917927, -1.8001664857787731),
    (0.70158627294603, -1.7006233915360325),
]


def test_matches_hand_stepped_quadratic():
    a, b = Tensor(np.array(1.0), requires_grad=True), Tensor(np.array(-2.0), requires_grad=True)
    opt = Adam({"a": a, "b": b}, lr=0.1)
    for expected_a, expected_b in HAND_STEPS:
        opt.zero_grad()
        T.backward(T.add(T.mul(a, a), T.mul(T.mul(b, b), 3.0)))
        opt.step()
        assert a.data == pytest.approx(expected_a, abs=1e-14)
        assert b.data == pytest.approx(expected_b, abs=1e-14)


def test_first_step_moves_by_lr_times_sign():
    x = Tensor(np.array([3.0, -5.0, 0.5]), requires_grad=True)
    opt = Adam({"x": x}, lr=0.01)
    x.grad = np.array([10.0, -0.001, 2.0])
    opt.step()
    np.testing.assert_allclose(x.data, [2.99, -4.99, 0.49], atol=1e-8)


def test_missing_gradient_is_zero():
    x = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam({"x": x})
    opt.step()
    assert x.data[0] == 1.0


def test_zero_grad_clears():
    x = Tensor(np.array([1.0]), requires_grad=True)
    x.grad = np.array([1.0])
    Adam({"x": x}).zero_grad()
    assert x.grad is None
