"""AdamW with decoupled weight decay and cosine learning-rate annealing."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, NumericalError


def cosine_anneal(lr_init: float, epoch: int, max_epochs: int) -> float:
    """lr_init * 0.5 * (1 + cos(pi * epoch / max_epochs))."""
    if max_epochs < 1:
        raise ConfigError(f"max_epochs must be >= 1, got {max_epochs}")
    if not 0 <= epoch <= max_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {max_epochs}]")
    return lr_init * 0.5 * (1.0 + math.cos(math.pi * epoch / max_epochs))


def init_adamw_state(model) -> dict:
    """Zero first/second moments per parameter tensor, shared step counter."""
    state = {"t": 0, "m": {}, "v": {}}
    for i, name, arr in model.parameters():
        state["m"][(i, name)] = np.zeros_like(arr)
        state["v"][(i, name)] = np.zeros_like(arr)
    return state


def adamw_step(
    model,
    state: dict,
    lr: float,
    weight_decay: float = 0.002,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place update of every parameter from the gradients in its module.

    The Adam moment estimates use bias correction; weight decay is decoupled,
    applied directly to the weights scaled by lr rather than folded into the
    gradient.
    """
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for i, name, p in model.parameters():
        g = model.modules[i].grads.get(name)
        if g is None:
            raise NumericalError(f"no gradient for parameter {name!r} of layer {i}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name!r} of layer {i}")
        m = state["m"][(i, name)]
        v = state["v"][(i, name)]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay:
            p -= (lr * weight_decay) * p
        p -= lr * update.astype(p.dtype)
