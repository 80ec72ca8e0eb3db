"""Adam with bias correction over a named set of arrays.

Parameters are a ``dict[str, np.ndarray]`` and are updated in place, so the same
dict can hold the network weights and the RAHL residual ``beta`` (as a 0-d
array) side by side.
"""

from dataclasses import dataclass, field

import numpy as np

from rahl.errors import InvalidArgumentError, TrainingDivergedError


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def hyper(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "step": self.step}


def adam_init(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Zeroed moments shaped like ``params`` (a dict of arrays or of shapes)."""
    if not (np.isfinite(lr) and lr > 0):
        raise InvalidArgumentError(f"learning rate must be positive, got {lr!r}")
    if not (0 < beta1 < 1 and 0 < beta2 < 1):
        raise InvalidArgumentError("beta1 and beta2 must lie in (0, 1)")
    shapes = {k: (np.shape(v) if isinstance(v, np.ndarray) else tuple(v)) for k, v in params.items()}
    return AdamState(
        lr=float(lr),
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        m={k: np.zeros(s) for k, s in shapes.items()},
        v={k: np.zeros(s) for k, s in shapes.items()},
    )


def adam_step(state, params, grads):
    """One bias-corrected Adam update of every array in ``params``, in place.

    Returns ``(params, state)`` for convenience; both are the objects passed in.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError("non-finite gradient", param=name)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        if np.shape(g) != p.shape:
            raise InvalidArgumentError(f"gradient for {name} has shape {np.shape(g)}, expected {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
