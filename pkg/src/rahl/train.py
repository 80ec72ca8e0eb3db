"""Mini-batch training loop and batched prediction."""

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from rahl.errors import InvalidArgumentError, TrainingDivergedError
from rahl.losses import DEFAULT_RAHL_ALPHA, LossSpec, loss_grads, loss_values
from rahl.model import LstmParams, ModelConfig, Workspace, backward, forward, init_params
from rahl.optim import AdamState, adam_init, adam_step

log = logging.getLogger(__name__)

PREDICT_CHUNK = 512


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class TrainConfig:
    """Training settings; defaults are the reference protocol (300 epochs, batch 24, window 36, lr 0.01)."""

    epochs: int = 300
    batch_size: int = 24
    window: int = 36
    lr: float = 0.01
    seed: int = 0
    loss: LossSpec = field(default_factory=lambda: LossSpec.rahl(DEFAULT_RAHL_ALPHA))
    train_fraction: float = 0.8
    hidden_size: int = 64
    fc_hidden: int = 64
    freeze_beta: bool = False  # RAHL only: keep beta out of the optimizer

    def __post_init__(self):
        for name in ("epochs", "batch_size", "window", "hidden_size", "fc_hidden"):
            _positive_int(name, getattr(self, name))
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise InvalidArgumentError(f"lr must be positive, got {self.lr!r}")
        if not (0 < self.train_fraction < 1):
            raise InvalidArgumentError(f"train_fraction must lie in (0, 1), got {self.train_fraction!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvalidArgumentError(f"seed must be a non-negative integer, got {self.seed!r}")
        if isinstance(self.loss, str):
            object.__setattr__(self, "loss", LossSpec.parse(self.loss))

    @property
    def model_config(self):
        return ModelConfig(input_size=1, hidden_size=self.hidden_size, fc_hidden=self.fc_hidden, seed=self.seed)

    def to_dict(self):
        d = asdict(self)
        d["loss"] = self.loss.to_dict()
        d["optimizer"] = "adam"
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "optimizer"}
        d["loss"] = LossSpec.from_dict(d["loss"])
        return cls(**d)


@dataclass
class TrainRecord:
    train_loss: list          # mean per-sample training loss for each epoch
    delta: list               # RAHL breakpoint after each epoch; empty for other losses
    params: LstmParams
    beta: float               # final RAHL residual (0.0 for other losses)
    adam: AdamState
    seconds: float

    @property
    def final_delta(self):
        return self.delta[-1] if self.delta else None


def batch_gradients(params, spec, inputs, targets, workspace=None):
    """Mean loss over one batch and its gradients.

    Returns ``(loss, grads, d_beta)`` where ``grads`` is an :class:`LstmGrads`
    and ``d_beta`` is the derivative with respect to RAHL's beta (None for
    other losses).
    """
    pred, trace = forward(params, inputs, workspace)
    m = len(targets)
    # overflow shows up as a non-finite loss, which the caller turns into an error
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(loss_values(spec, targets, pred).sum()) / m
        d_pred, d_beta = loss_grads(spec, targets, pred)
    grads = backward(params, trace, d_pred / m, workspace)
    return loss, grads, None if d_beta is None else float(d_beta.sum() / m)


def train(config, data, callback=None, params=None):
    """Train on ``data`` (a :class:`~rahl.data.WindowedDataset` of scaled values).

    ``callback(epoch, params, beta)`` runs after every epoch. The run is a pure
    function of ``config.seed``: weights come from ``default_rng(seed)`` and the
    per-epoch batch permutations from ``default_rng([seed, 1])``.
    """
    n = len(data)
    if n == 0:
        raise InvalidArgumentError("training dataset is empty")
    if config.batch_size > n:
        raise InvalidArgumentError(f"batch_size {config.batch_size} exceeds the {n} training samples")
    if data.w != config.window:
        raise InvalidArgumentError(f"dataset window {data.w} does not match config window {config.window}")

    spec = config.loss
    params = init_params(config.model_config) if params is None else params
    opt_params = params.as_dict()
    beta = np.array(spec.beta if spec.is_rahl else 0.0)
    learn_beta = spec.is_rahl and not config.freeze_beta
    if learn_beta:
        opt_params = {**opt_params, "beta": beta}
    adam = adam_init(opt_params, config.lr)
    shuffle = np.random.default_rng([config.seed, 1])
    ws = Workspace()

    inputs, targets = data.inputs, data.targets
    losses, deltas = [], []
    start = time.perf_counter()
    for epoch in range(config.epochs):
        order = shuffle.permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            cur = spec.with_beta(float(beta)) if spec.is_rahl else spec
            mean_loss, grads, d_beta = batch_gradients(params, cur, inputs[idx], targets[idx], ws)
            if not math.isfinite(mean_loss):
                raise TrainingDivergedError("non-finite training loss", epoch=epoch, batch=b)
            total += mean_loss * len(idx)
            grads = grads.as_dict()
            if learn_beta:
                grads["beta"] = np.array(d_beta)
            try:
                adam_step(adam, opt_params, grads)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError("non-finite gradient", param=exc.param, epoch=epoch, batch=b) from None
        losses.append(total / n)
        if spec.is_rahl:
            deltas.append(spec.with_beta(float(beta)).effective_delta)
        if callback is not None:
            callback(epoch, params, float(beta))
        log.debug("epoch %d loss %.6g", epoch, losses[-1])
    return TrainRecord(losses, deltas, params, float(beta), adam, time.perf_counter() - start)


def predict_scaled(params, inputs):
    """Forward pass over many windows, chunked to bound memory. Returns scaled predictions."""
    inputs = np.asarray(inputs, dtype=np.float64)
    out = np.empty(len(inputs))
    for lo in range(0, len(inputs), PREDICT_CHUNK):
        pred, _ = forward(params, inputs[lo : lo + PREDICT_CHUNK])
        out[lo : lo + PREDICT_CHUNK] = pred
    return out


def predict_series(params, scaler, dataset):
    """Predictions and targets for every window, both in original units."""
    preds = predict_scaled(params, dataset.inputs)
    return scaler.unscale(preds), scaler.unscale(dataset.targets)
