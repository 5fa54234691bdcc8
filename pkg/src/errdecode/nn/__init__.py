"""Minimal convolutional-network framework with exact gradients."""

from .layers import (
    ELU,
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    LogSoftmax,
    MaxPool,
    MeanPool,
    Module,
    SafeLog,
    Square,
)
from .models import (
    LayerSpec,
    NetworkModel,
    backward,
    build_deep4,
    build_network,
    build_shallow,
    forward,
    load_model,
    nll_loss,
    save_model,
)
from .optim import adamw_step, cosine_anneal, init_adamw_state
from .training import TrainConfig, class_balanced_batches, predict, shuffled_batches, train

__all__ = [
    "ELU",
    "BatchNorm",
    "Conv2d",
    "Dense",
    "Dropout",
    "LogSoftmax",
    "MaxPool",
    "MeanPool",
    "Module",
    "SafeLog",
    "Square",
    "LayerSpec",
    "NetworkModel",
    "backward",
    "build_deep4",
    "build_network",
    "build_shallow",
    "forward",
    "load_model",
    "nll_loss",
    "save_model",
    "adamw_step",
    "cosine_anneal",
    "init_adamw_state",
    "TrainConfig",
    "class_balanced_batches",
    "predict",
    "shuffled_batches",
    "train",
]
