"""Regression losses: MSE, MAE, fixed-breakpoint Huber and the adaptive Huber (RAHL).

For RAHL the breakpoint is ``delta = alpha + elu(beta, alpha)`` where ``alpha``
is the initial breakpoint (and also the ELU smoothness constant) and ``beta``
is a trainable scalar shared by every sample.

Conventions:

* standalone MSE is the unhalved ``(y - pred)**2``; the Huber quadratic branch
  keeps its ``0.5 * r**2``.
* ``|y - pred| == delta`` belongs to the quadratic branch.
* the MAE subgradient at ``y == pred`` is 0.

The scalar functions (``loss_value``, ``loss_grad``) validate their inputs and
are the reference surface; ``loss_values`` / ``loss_grads`` are the vectorised
versions used by the training loop.
"""

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from rahl.errors import InvalidArgumentError

_DELTA_FLOOR = float(np.finfo(np.float64).tiny)

# initial delta used when RAHL is requested without an explicit alpha
# (targets are min-max scaled, so residuals are mostly well below 1)
DEFAULT_RAHL_ALPHA = 0.5


class Variant(str, enum.Enum):
    MSE = "mse"
    MAE = "mae"
    HUBER = "huber"
    RAHL = "rahl"


@dataclass(frozen=True)
class LossSpec:
    variant: Variant
    delta: Optional[float] = None
    alpha: Optional[float] = None
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is Variant.HUBER:
            if self.delta is None or not (math.isfinite(self.delta) and self.delta > 0):
                raise InvalidArgumentError(f"huber delta must be a positive finite number, got {self.delta!r}")
        elif self.variant is Variant.RAHL:
            if self.alpha is None or not (math.isfinite(self.alpha) and self.alpha > 0):
                raise InvalidArgumentError(f"rahl alpha must be a positive finite number, got {self.alpha!r}")
            if not math.isfinite(self.beta):
                raise InvalidArgumentError(f"rahl beta must be finite, got {self.beta!r}")

    @classmethod
    def mse(cls):
        return cls(Variant.MSE)

    @classmethod
    def mae(cls):
        return cls(Variant.MAE)

    @classmethod
    def huber(cls, delta):
        return cls(Variant.HUBER, delta=float(delta))

    @classmethod
    def rahl(cls, alpha, beta=0.0):
        return cls(Variant.RAHL, alpha=float(alpha), beta=float(beta))

    @classmethod
    def parse(cls, text):
        """Parse ``mse``, ``mae``, ``huber:<delta>`` or ``rahl:<alpha>``."""
        name, _, arg = text.strip().lower().partition(":")
        try:
            if name == "mse" and not arg:
                return cls.mse()
            if name == "mae" and not arg:
                return cls.mae()
            if name == "huber" and arg:
                return cls.huber(float(arg))
            if name == "rahl" and arg:
                return cls.rahl(float(arg))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad loss {text!r}: {exc}") from None
        raise InvalidArgumentError(f"bad loss {text!r}; expected mse, mae, huber:<delta> or rahl:<alpha>")

    @property
    def is_rahl(self):
        return self.variant is Variant.RAHL

    @property
    def effective_delta(self):
        """Breakpoint in use, or None for MSE/MAE."""
        if self.variant is Variant.HUBER:
            return self.delta
        if self.variant is Variant.RAHL:
            return rahl_delta(self.alpha, self.beta)
        return None

    def with_beta(self, beta):
        return replace(self, beta=float(beta))

    def label(self):
        if self.variant is Variant.HUBER:
            return f"huber:{self.delta:g}"
        if self.variant is Variant.RAHL:
            return f"rahl:{self.alpha:g}"
        return self.variant.value

    def to_dict(self):
        d = {"variant": self.variant.value}
        if self.variant is Variant.HUBER:
            d["delta"] = self.delta
        elif self.variant is Variant.RAHL:
            d["alpha"] = self.alpha
            d["beta"] = self.beta
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(Variant(d["variant"]), delta=d.get("delta"), alpha=d.get("alpha"), beta=d.get("beta", 0.0))


@dataclass(frozen=True)
class LossGrad:
    d_pred: float
    d_beta: Optional[float] = None


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidArgumentError(f"{name} must be finite, got {value!r}")


def elu(x, a=1.0):
    """Identity for ``x >= 0``, ``a * (exp(x) - 1)`` below zero."""
    _check_finite(x=x, a=a)
    if a <= 0:
        raise InvalidArgumentError(f"elu constant must be positive, got {a!r}")
    return x if x >= 0 else a * math.expm1(x)


def elu_prime(x, a=1.0):
    return 1.0 if x >= 0 else a * math.exp(x)


def rahl_delta(alpha, beta):
    """Learned breakpoint ``alpha + elu(beta, alpha)``; always strictly positive."""
    _check_finite(alpha=alpha, beta=beta)
    if alpha <= 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha!r}")
    if beta >= 0:
        return alpha + beta
    # alpha + alpha*(e^b - 1) == alpha*e^b; the product form avoids the
    # cancellation to 0 of the sum, and the floor keeps exp underflow positive.
    return max(alpha * math.exp(beta), _DELTA_FLOOR)


def huber(residual, delta):
    """Elementwise Huber penalty of ``residual`` (array-friendly)."""
    r = np.abs(residual)
    return np.where(r <= delta, 0.5 * r * r, delta * r - 0.5 * delta * delta)


def loss_values(spec, ys, preds):
    """Per-sample losses for arrays ``ys`` and ``preds``."""
    r = np.asarray(ys, dtype=np.float64) - np.asarray(preds, dtype=np.float64)
    if spec.variant is Variant.MSE:
        return r * r
    if spec.variant is Variant.MAE:
        return np.abs(r)
    return huber(r, spec.effective_delta)


def loss_grads(spec, ys, preds):
    """Per-sample ``d loss / d pred`` and, for RAHL, per-sample ``d loss / d beta``.

    Returns ``(d_pred, d_beta)`` arrays; ``d_beta`` is None unless ``spec`` is a RAHL loss.
    """
    r = np.asarray(ys, dtype=np.float64) - np.asarray(preds, dtype=np.float64)
    if spec.variant is Variant.MSE:
        return -2.0 * r, None
    if spec.variant is Variant.MAE:
        return -np.sign(r), None
    delta = spec.effective_delta
    a = np.abs(r)
    linear = a > delta
    d_pred = np.where(linear, -delta * np.sign(r), -r)
    if spec.variant is Variant.HUBER:
        return d_pred, None
    # d/d delta of the linear branch is |r| - delta; the quadratic branch has no delta in it.
    d_beta = np.where(linear, (a - delta) * elu_prime(spec.beta, spec.alpha), 0.0)
    return d_pred, d_beta


def loss_value(spec, y, pred):
    _check_finite(y=y, pred=pred)
    return float(loss_values(spec, y, pred))


def loss_grad(spec, y, pred):
    _check_finite(y=y, pred=pred)
    d_pred, d_beta = loss_grads(spec, y, pred)
    return LossGrad(float(d_pred), None if d_beta is None else float(d_beta))


def batch_loss(spec, ys, preds):
    """Arithmetic mean of the per-sample losses."""
    ys = np.asarray(ys, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if ys.shape != preds.shape or ys.ndim != 1:
        raise InvalidArgumentError(f"ys and preds must be 1-d of equal length, got {ys.shape} and {preds.shape}")
    if ys.size == 0:
        raise InvalidArgumentError("empty batch")
    if not (np.all(np.isfinite(ys)) and np.all(np.isfinite(preds))):
        raise InvalidArgumentError("non-finite values in batch")
    return float(np.mean(loss_values(spec, ys, preds)))
