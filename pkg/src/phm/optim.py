"""SGD with momentum, L2 weight decay and a step learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ShapeError

__all__ = ["SgdState", "sgd_step", "lr_at"]


@dataclass
class SgdState:
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")


def sgd_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: SgdState) -> None:
    """In-place update ``v = m*v + g + wd*p``; ``p -= lr*v`` for every named array.

    Velocity buffers are created (zero) on first use.
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = state.velocity[name] = np.zeros_like(p)
        elif v.shape != p.shape:
            raise ShapeError(f"{name}: velocity shape {v.shape} != param shape {p.shape}")
        v *= state.momentum
        v += g
        if state.weight_decay:
            v += state.weight_decay * p
        p -= state.lr * v


def lr_at(epoch: int, base_lr: float, drops) -> float:
    """Learning rate for 1-based ``epoch``; each ``(after_epoch, factor)`` applies once ``epoch > after_epoch``."""
    lr = base_lr
    for after, factor in drops:
        if epoch > after:
            lr *= factor
    return lr
