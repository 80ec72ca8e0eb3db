import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rahl.errors import InvalidArgumentError
from rahl.losses import LossSpec, Variant, batch_loss, elu, loss_grad, loss_value, rahl_delta


def huber_by_hand(r, delta):
    if abs(r) <= delta:
        return 0.5 * r * r
    return delta * abs(r) - 0.5 * delta * delta


def central_diff(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


# ---------------------------------------------------------------- elu / delta


def test_elu_examples():
    assert elu(0, 1) == 0
    assert elu(2.5, 1) == 2.5
    assert elu(-1, 1) == pytest.approx(math.exp(-1) - 1, abs=1e-15)
    assert elu(-1, 1) == pytest.approx(-0.6321206, abs=1e-7)


@pytest.mark.parametrize("x, a", [(math.nan, 1.0), (math.inf, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_elu_rejects_bad_arguments(x, a):
    with pytest.raises(InvalidArgumentError):
        elu(x, a)


@given(st.floats(-700, 700), st.floats(1e-3, 100))
def test_elu_range_is_open_at_minus_a(x, a):
    y = elu(x, a)
    assert y >= -a
    if x > -30:  # beyond this a*(e^x - 1) rounds to -a in float64
        assert y > -a


def test_rahl_delta_examples():
    assert rahl_delta(1, 0) == 1
    assert rahl_delta(1, 2) == 3
    d = rahl_delta(1, -20)
    assert d > 0
    assert d == pytest.approx(1 + math.expm1(-20), rel=1e-9)
    assert d == pytest.approx(2.06e-9, rel=1e-2)


def test_rahl_delta_rejects_nonpositive_alpha():
    with pytest.raises(InvalidArgumentError):
        rahl_delta(0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        LossSpec.rahl(-1.0)


@given(st.floats(1e-6, 1e3), st.floats(-1e6, 1e6))
def test_rahl_delta_positive(alpha, beta):
    assert rahl_delta(alpha, beta) > 0


@given(st.floats(1e-3, 10), st.floats(-50, 50), st.floats(0, 5))
def test_rahl_delta_monotone(alpha, beta, step):
    assert rahl_delta(alpha, beta + step) >= rahl_delta(alpha, beta)


def test_rahl_delta_extreme_negative():
    assert rahl_delta(1.0, -1e6) > 0
    assert rahl_delta(0.1, -1e6) > 0


# ---------------------------------------------------------------- values


def test_loss_value_examples():
    assert loss_value(LossSpec.huber(2), 1, 0) == 0.5
    assert loss_value(LossSpec.huber(0.5), 2, 0) == 0.875
    assert loss_value(LossSpec.huber(1), 1, 0) == 0.5
    assert loss_value(LossSpec.rahl(1, 0), 3, 0) == 2.5
    assert loss_value(LossSpec.mse(), 3, 1) == 4.0
    assert loss_value(LossSpec.mae(), 3, 1) == 2.0


def test_loss_value_rejects_nonfinite():
    with pytest.raises(InvalidArgumentError):
        loss_value(LossSpec.mse(), math.nan, 0)
    with pytest.raises(InvalidArgumentError):
        loss_grad(LossSpec.mae(), 0, math.inf)


def test_huber_requires_positive_delta():
    with pytest.raises(InvalidArgumentError):
        LossSpec.huber(0)
    with pytest.raises(InvalidArgumentError):
        LossSpec.parse("huber:0")


def test_branch_continuity_grid():
    rng = np.random.default_rng(0)
    for delta in rng.uniform(1e-3, 50, size=200):
        for r in (delta, -delta):
            quad = 0.5 * r * r
            lin = delta * abs(r) - 0.5 * delta * delta
            assert abs(quad - lin) <= 1e-12 * max(1.0, quad)
            assert loss_value(LossSpec.huber(delta), r, 0.0) == quad


def test_large_delta_is_half_squared_error():
    spec = LossSpec.huber(1e6)
    for r in np.linspace(-100, 100, 201):
        assert loss_value(spec, r, 0.0) == pytest.approx(0.5 * r * r, rel=1e-9, abs=1e-300)


def test_small_delta_tends_to_scaled_mae():
    for r in (-3.0, 0.2, 7.5):
        for delta in (1e-3, 1e-6):
            v = loss_value(LossSpec.huber(delta), r, 0.0)
            assert v < delta * abs(r) + 1e-15
            # v / delta = |r| - delta / 2 -> |r|
            assert abs(v / delta - abs(r)) <= delta / 2 + 1e-12


SPECS = [LossSpec.mse(), LossSpec.mae(), LossSpec.huber(0.7), LossSpec.rahl(1.3, -0.4), LossSpec.rahl(0.5, 0.8)]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label())
@given(y=st.floats(-1e3, 1e3), pred=st.floats(-1e3, 1e3))
def test_symmetry(spec, y, pred):
    assert loss_value(spec, y, pred) == loss_value(spec, pred, y)


# ---------------------------------------------------------------- gradients


def test_loss_grad_examples():
    assert loss_grad(LossSpec.huber(2), 1, 0).d_pred == -1
    g = loss_grad(LossSpec.rahl(1, 0), 3, 0)
    assert g.d_beta == 2
    assert g.d_pred == -1
    assert loss_grad(LossSpec.mse(), 1, 0).d_pred == -2
    assert loss_grad(LossSpec.mae(), 1, 0).d_pred == -1


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label())
def test_grad_zero_at_minimum(spec):
    g = loss_grad(spec, 2.5, 2.5)
    assert g.d_pred == 0
    if spec.is_rahl:
        assert g.d_beta == 0
    else:
        assert g.d_beta is None


def test_boundary_uses_quadratic_branch():
    g = loss_grad(LossSpec.huber(1.0), 1.0, 0.0)
    assert g.d_pred == -1.0
    g = loss_grad(LossSpec.rahl(1.0, 0.0), 1.0, 0.0)
    assert g.d_beta == 0.0


def test_rahl_beta_gradient_matches_finite_difference():
    alpha, beta, y, pred = 1.0, -0.5, 5.0, 0.0
    analytic = loss_grad(LossSpec.rahl(alpha, beta), y, pred).d_beta
    fd = central_diff(lambda b: huber_by_hand(y - pred, rahl_delta(alpha, b)), beta)
    assert analytic == pytest.approx(fd, rel=1e-6)


def test_randomised_gradients_match_finite_differences():
    rng = np.random.default_rng(1234)
    h = 1e-6
    checked = 0
    while checked < 1000:
        kind = rng.integers(4)
        if kind == 0:
            spec = LossSpec.mse()
        elif kind == 1:
            spec = LossSpec.mae()
        elif kind == 2:
            spec = LossSpec.huber(rng.uniform(0.1, 4))
        else:
            spec = LossSpec.rahl(rng.uniform(0.1, 4), rng.uniform(-3, 3))
        y, pred = rng.uniform(-10, 10, size=2)
        r = abs(y - pred)
        delta = spec.effective_delta
        if delta is not None and abs(r - delta) < 1e-4:
            continue
        if spec.variant is Variant.MAE and r < 1e-4:
            continue
        if spec.is_rahl and abs(spec.beta) < 1e-4:
            continue
        g = loss_grad(spec, y, pred)
        fd_pred = central_diff(lambda p: loss_value(spec, y, p), pred, h)
        assert g.d_pred == pytest.approx(fd_pred, rel=1e-6, abs=1e-9)
        if spec.is_rahl:
            fd_beta = central_diff(lambda b: loss_value(spec.with_beta(b), y, pred), spec.beta, h)
            assert g.d_beta == pytest.approx(fd_beta, rel=1e-6, abs=1e-9)
        checked += 1


# ---------------------------------------------------------------- batch


def test_batch_loss_examples():
    assert batch_loss(LossSpec.mse(), [1, 1], [0, 2]) == 1.0
    assert batch_loss(LossSpec.huber(1), [0, 0], [0.5, 3]) == 1.3125
    for spec in SPECS:
        assert batch_loss(spec, [1, 2, 3], [1, 2, 3]) == 0


def test_batch_loss_errors():
    with pytest.raises(InvalidArgumentError):
        batch_loss(LossSpec.mse(), [1, 2], [1])
    with pytest.raises(InvalidArgumentError):
        batch_loss(LossSpec.mse(), [], [])


@pytest.mark.parametrize(
    "text, expected",
    [
        ("mse", LossSpec.mse()),
        ("MAE", LossSpec.mae()),
        ("huber:1.5", LossSpec.huber(1.5)),
        ("rahl:0.1", LossSpec.rahl(0.1)),
    ],
)
def test_parse(text, expected):
    assert LossSpec.parse(text) == expected


@pytest.mark.parametrize("text", ["huber", "rahl:", "rahl:-1", "huber:x", "mse:1", "l1"])
def test_parse_rejects(text):
    with pytest.raises(InvalidArgumentError):
        LossSpec.parse(text)


def test_roundtrip_dict():
    for spec in SPECS:
        assert LossSpec.from_dict(spec.to_dict()) == spec
