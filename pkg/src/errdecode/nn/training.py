"""Training loop: class-balanced batches, AdamW, cosine annealing.

The batch iterator draws a class uniformly for every slot and then a trial
uniformly with replacement within that class, so each epoch sees both classes
equally often in expectation regardless of the 19%-error imbalance. The
per-epoch history entry records the loss over that epoch's batches and the
macro-averaged accuracy of an eval-mode pass over the full training set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import EpochSet
from ..errors import ConfigError, DataError, NumericalError
from ..rng import derive_rng
from .models import NetworkModel, backward
from .optim import adamw_step, cosine_anneal, init_adamw_state


@dataclass
class TrainConfig:
    """Optimizer and schedule settings."""

    max_epochs: int = 200
    batch_size: int = 32
    lr_init: float = 0.01 / 32
    weight_decay: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    balanced_batches: bool = True

    def __post_init__(self):
        if self.lr_init <= 0:
            raise ConfigError(f"lr_init must be positive, got {self.lr_init}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    def to_dict(self) -> dict:
        return {
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "lr_init": self.lr_init,
            "weight_decay": self.weight_decay,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "seed": self.seed,
            "balanced_batches": self.balanced_batches,
        }


def class_balanced_batches(labels, batch_size, n_batches, seed, n_classes=2):
    """Index batches where every slot picks a class, then a trial, uniformly.

    Sampling is with replacement, so in expectation each class contributes
    the same number of examples per epoch. ``seed`` may be an int or a
    Generator.
    """
    labels = np.asarray(labels)
    pools = [np.flatnonzero(labels == c) for c in range(n_classes)]
    for c, pool in enumerate(pools):
        if len(pool) == 0:
            raise DataError(f"class {c} has no trials; cannot balance batches")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(int(seed), "batches")
    cls = rng.integers(0, n_classes, size=(n_batches, batch_size))
    u = rng.random((n_batches, batch_size))
    sizes = np.array([len(p) for p in pools])
    width = sizes.max()
    table = np.zeros((n_classes, width), dtype=np.int64)
    for c, pool in enumerate(pools):
        table[c, : len(pool)] = pool
    pick = np.minimum((u * sizes[cls]).astype(np.int64), sizes[cls] - 1)
    batches = table[cls, pick]
    return [batches[i] for i in range(n_batches)]


def shuffled_batches(n_trials, batch_size, seed):
    """Plain epoch iteration: a shuffled pass over all trials, no replacement."""
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(int(seed), "batches")
    order = rng.permutation(n_trials)
    return [order[lo : lo + batch_size] for lo in range(0, n_trials, batch_size)]


def _macro_train_accuracy(model, X, labels):
    from ..metrics import acc_norm, confusion

    preds, _ = predict(model, X)
    return acc_norm(confusion(preds, labels))


def train(model: NetworkModel, train_epochs: EpochSet, config: TrainConfig):
    """Run the fixed epoch budget; returns (model, history).

    No early stopping: the returned model is the last-epoch model. History
    entries carry epoch, mean batch loss, macro train accuracy, and the
    learning rate used.
    """
    X = np.asarray(train_epochs.tensor, dtype=np.float32)
    y = np.asarray(train_epochs.labels)
    if len(np.unique(y)) < 2:
        raise DataError("training set must contain at least 2 classes")
    n_batches = math.ceil(len(y) / config.batch_size)
    state = init_adamw_state(model)
    history = []
    for epoch in range(config.max_epochs):
        lr = cosine_anneal(config.lr_init, epoch, config.max_epochs)
        batch_rng = derive_rng(config.seed, "batches", epoch)
        drop_rng = derive_rng(config.seed, "dropout", epoch)
        if config.balanced_batches:
            batches = class_balanced_batches(
                y, config.batch_size, n_batches, batch_rng, model.n_classes
            )
        else:
            batches = shuffled_batches(len(y), config.batch_size, batch_rng)
        losses = []
        for idx in batches:
            loss = backward(model, X[idx], y[idx], rng=drop_rng)
            if not np.isfinite(loss):
                raise NumericalError(f"training diverged at epoch {epoch}")
            adamw_step(
                model,
                state,
                lr,
                weight_decay=config.weight_decay,
                beta1=config.beta1,
                beta2=config.beta2,
                eps=config.eps,
            )
            losses.append(loss)
        history.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "accuracy": float(_macro_train_accuracy(model, X, y)),
                "lr": lr,
            }
        )
    model.history = history
    model.train_config = config.to_dict()
    return model, history


def predict(model: NetworkModel, epochs, batch_size: int = 256):
    """Argmax over eval-mode log-probabilities; ties go to the lower index."""
    X = epochs.tensor if isinstance(epochs, EpochSet) else np.asarray(epochs)
    X = np.asarray(X, dtype=np.float32)
    chunks = []
    for lo in range(0, len(X), batch_size):
        chunks.append(model.forward(X[lo : lo + batch_size], mode="eval"))
    logp = np.concatenate(chunks) if chunks else np.zeros((0, model.n_classes))
    labels = logp.argmax(axis=1).astype(np.int64)
    return labels, logp
