import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rahl.errors import InvalidArgumentError, TrainingDivergedError
from rahl.optim import adam_init, adam_step


def scalar_params(value=0.0):
    return {"w": np.array(float(value))}


def test_init_defaults():
    params = {"a": np.zeros((2, 3)), "b": np.zeros(4)}
    state = adam_init(params, 0.01)
    assert state.lr == 0.01
    assert (state.beta1, state.beta2, state.eps, state.step) == (0.9, 0.999, 1e-8, 0)
    assert state.m["a"].shape == (2, 3) and state.v["b"].shape == (4,)
    assert all(np.all(m == 0) for m in state.m.values())


@pytest.mark.parametrize("lr", [0.0, -0.1, math.nan])
def test_init_rejects_bad_lr(lr):
    with pytest.raises(InvalidArgumentError):
        adam_init(scalar_params(), lr)


def test_zero_gradient_leaves_params_but_counts_step():
    params = {"a": np.arange(6.0).reshape(2, 3)}
    before = params["a"].copy()
    state = adam_init(params, 0.01)
    adam_step(state, params, {"a": np.zeros((2, 3))})
    assert np.array_equal(params["a"], before)
    assert state.step == 1


def test_first_step_is_about_lr():
    params = scalar_params(1.0)
    state = adam_init(params, 0.01)
    adam_step(state, params, {"w": np.array(0.5)})
    delta = 1.0 - float(params["w"])
    assert 0.0099 <= delta <= 0.01


@given(st.floats(1e-4, 1e6), st.booleans())
def test_first_step_is_scale_free(mag, negative):
    g = -mag if negative else mag
    params = scalar_params(0.0)
    state = adam_init(params, 0.01)
    adam_step(state, params, {"w": np.array(g)})
    step = abs(float(params["w"]))
    assert 0.01 * (1 - 1e-4) <= step <= 0.01
    assert math.copysign(1, -float(params["w"])) == math.copysign(1, g)


def test_two_steps_match_scripted_adam():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    w, m, v = 0.3, 0.0, 0.0
    for t, g in enumerate((1.0, -1.0), start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)

    params = scalar_params(0.3)
    state = adam_init(params, lr)
    adam_step(state, params, {"w": np.array(1.0)})
    adam_step(state, params, {"w": np.array(-1.0)})
    assert abs(float(params["w"]) - w) <= 1e-12


def test_nonfinite_gradient_names_parameter():
    params = {"good": np.zeros(2), "bad": np.zeros(2)}
    state = adam_init(params, 0.01)
    with pytest.raises(TrainingDivergedError) as info:
        adam_step(state, params, {"good": np.zeros(2), "bad": np.array([0.0, np.inf])})
    assert info.value.param == "bad"


def test_deterministic():
    rng = np.random.default_rng(0)
    grads = [{"a": rng.normal(size=5)} for _ in range(4)]
    results = []
    for _ in range(2):
        params = {"a": np.ones(5)}
        state = adam_init(params, 0.01)
        for g in grads:
            adam_step(state, params, g)
        results.append(params["a"].copy())
    assert np.array_equal(*results)


def test_moments_decay_geometrically_after_gradients_stop():
    params = {"a": np.zeros(3)}
    state = adam_init(params, 0.01)
    adam_step(state, params, {"a": np.array([1.0, -2.0, 0.5])})
    m0, v0 = state.m["a"].copy(), state.v["a"].copy()
    for k in range(1, 6):
        adam_step(state, params, {"a": np.zeros(3)})
        np.testing.assert_allclose(state.m["a"], m0 * 0.9**k, rtol=1e-12)
        np.testing.assert_allclose(state.v["a"], v0 * 0.999**k, rtol=1e-12)
    assert np.all(state.v["a"] >= 0)


def test_shape_mismatch_rejected():
    params = {"a": np.zeros(3)}
    state = adam_init(params, 0.01)
    with pytest.raises(InvalidArgumentError):
        adam_step(state, params, {"a": np.zeros(4)})
