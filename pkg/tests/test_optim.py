import numpy as np
import pytest

from phm.errors import ShapeError
from phm.optim import SgdState, lr_at, sgd_step


def test_zero_grad_no_decay_is_noop():
    p = {"w": np.array([1.0, -2.0])}
    sgd_step(p, {"w": np.zeros(2)}, SgdState(lr=0.1, weight_decay=0.0))
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_single_step():
    p = {"w": np.array([1.0, 2.0])}
    sgd_step(p, {"w": np.array([0.5, -1.0])}, SgdState(lr=0.1, weight_decay=0.0))
    np.testing.assert_allclose(p["w"], [0.95, 2.1])


def test_two_steps_momentum():
    g = np.array([0.3])
    p = {"w": np.array([0.0])}
    state = SgdState(lr=0.05, momentum=0.9, weight_decay=0.0)
    sgd_step(p, {"w": g}, state)
    sgd_step(p, {"w": g}, state)
    np.testing.assert_allclose(p["w"], -0.05 * (g + 1.9 * g))


def test_weight_decay():
    p = {"w": np.array([2.0])}
    sgd_step(p, {"w": np.array([0.0])}, SgdState(lr=0.5, momentum=0.0, weight_decay=0.1))
    np.testing.assert_allclose(p["w"], [2.0 - 0.5 * 0.2])


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        sgd_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, SgdState())


def test_lr_positive():
    with pytest.raises(ValueError):
        SgdState(lr=0.0)


def test_lr_schedule():
    drops = ((15, 0.1), (25, 0.1))
    assert lr_at(1, 0.05, drops) == 0.05
    assert lr_at(15, 0.05, drops) == 0.05
    assert lr_at(16, 0.05, drops) == pytest.approx(0.005)
    assert lr_at(26, 0.05, drops) == pytest.approx(0.0005)
