import numpy as np
import pytest

from nbeatsx.errors import ShapeMismatchError
from nbeatsx.optim import AdamState, adam_step, init_weights
from nbeatsx.tensor import Tensor


def test_orthogonal_columns():
    q = init_weights("orthogonal", (4, 4), np.random.default_rng(0)).data
    assert np.allclose(q.T @ q, np.eye(4), atol=1e-10)


def test_orthogonal_rectangular_shapes():
    tall = init_weights("orthogonal", (6, 3), np.random.default_rng(1)).data
    assert np.allclose(tall.T @ tall, np.eye(3), atol=1e-10)
    wide = init_weights("orthogonal", (3, 6), np.random.default_rng(2)).data
    assert np.allclose(wide @ wide.T, np.eye(3), atol=1e-10)


def test_orthogonal_requires_2d():
    with pytest.raises(ShapeMismatchError):
        init_weights("orthogonal", (4, 4, 2), np.random.default_rng(0))


def test_glorot_variance():
    w = init_weights("glorot_norm", (100, 100), np.random.default_rng(5)).data
    target = 2.0 / 200
    assert abs(w.var() / target - 1.0) < 0.2


def test_he_variance():
    w = init_weights("he_norm", (200, 50), np.random.default_rng(6)).data
    target = 2.0 / 200
    assert abs(w.var() / target - 1.0) < 0.2


@pytest.mark.parametrize("strategy", ["orthogonal", "he_norm", "glorot_norm"])
def test_init_deterministic_for_seed(strategy):
    a = init_weights(strategy, (8, 8), np.random.default_rng(7)).data
    b = init_weights(strategy, (8, 8), np.random.default_rng(7)).data
    assert np.array_equal(a, b)


def test_adam_zero_gradient_leaves_params():
    params = {"w": Tensor(np.arange(4.0))}
    state = AdamState.for_params(params)
    before = params["w"].data.copy()
    adam_step(params, {"w": np.zeros(4)}, state, lr=0.1)
    assert np.array_equal(params["w"].data, before)
    assert state.step == 1


def test_adam_first_step_is_signed_lr():
    # bias correction makes m_hat / sqrt(v_hat) = sign(g) on the first step
    g = np.array([0.3, -2.0, 1e-3])
    params = {"w": Tensor(np.zeros(3))}
    state = AdamState.for_params(params)
    adam_step(params, {"w": g}, state, lr=0.01)
    assert np.allclose(params["w"].data, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_trajectory_deterministic():
    def run():
        rng = np.random.default_rng(11)
        params = {"w": Tensor(rng.normal(size=5))}
        state = AdamState.for_params(params)
        for _ in range(25):
            adam_step(params, {"w": 2.0 * params["w"].data}, state, lr=0.05)
        return params["w"].data
    assert np.array_equal(run(), run())


def test_adam_shape_mismatch():
    params = {"w": Tensor(np.zeros(3))}
    state = AdamState.for_params(params)
    with pytest.raises(ShapeMismatchError):
        adam_step(params, {"w": np.zeros(4)}, state, lr=0.1)


def test_adam_rejects_nonpositive_lr():
    params = {"w": Tensor(np.zeros(2))}
    with pytest.raises(ValueError):
        adam_step(params, {"w": np.zeros(2)}, AdamState.for_params(params), lr=0.0)
