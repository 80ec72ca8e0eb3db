"""LSTM forecasting with a Huber loss whose breakpoint is learned during training."""

__version__ = "0.1.0"

from rahl.losses import LossSpec, Variant, batch_loss, elu, loss_grad, loss_value, rahl_delta
from rahl.model import LstmParams, ModelConfig, backward, forward, init_params
from rahl.train import TrainConfig, TrainRecord, train

__all__ = [
    "LossSpec",
    "Variant",
    "batch_loss",
    "elu",
    "loss_grad",
    "loss_value",
    "rahl_delta",
    "LstmParams",
    "ModelConfig",
    "backward",
    "forward",
    "init_params",
    "TrainConfig",
    "TrainRecord",
    "train",
]
