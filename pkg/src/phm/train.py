"""Joint training of the classifier and the target distribution.

Per sample: optional horizontal flip -> distribution matcher (if enabled) at
native resolution -> bilinear resize to the classifier input -> logits ->
cross-entropy. Gradients are averaged over the batch and both parameter sets
go through one SGD optimizer.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .data import DegradeSpec, degrade, stack
from .image import resize_bilinear, resize_bilinear_backward
from .matcher import DEFAULT_SIZE, ParamContainer, init_linear_ramp, phm_backward, phm_forward
from .model import TinyClassifier, cross_entropy
from .optim import SgdState, lr_at, sgd_step

__all__ = [
    "TrainConfig",
    "EpochMetrics",
    "TrainResult",
    "preprocess",
    "composite_loss",
    "train",
    "evaluate",
    "write_metrics_csv",
]

log = logging.getLogger(__name__)

PHM_KEY = "phm.params"


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    # (after_epoch, factor): scaled-down version of the 175 / 50 / 100 schedule
    lr_drops: tuple = ((15, 0.1), (25, 0.1))
    seed: int = 0
    size: int = DEFAULT_SIZE
    phm_enabled: bool = True
    augment: bool = True
    input_size: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.size < 2:
            raise ValueError(f"size must be >= 2, got {self.size}")


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_acc: float
    lr: float
    batch_losses: list = field(default_factory=list, repr=False)
    phm_grad_norm: float = 0.0


@dataclass
class TrainResult:
    model: TinyClassifier
    params: ParamContainer
    history: list


def preprocess(images: np.ndarray, pc: ParamContainer | None, input_size: int):
    """Matcher (when ``pc`` is given) then resize. Returns ``(x, phm_cache)``."""
    cache = None
    if pc is not None:
        images, cache = phm_forward(images, pc)
    x = resize_bilinear(images, input_size, input_size)
    return x, cache


def composite_loss(model: TinyClassifier, pc: ParamContainer | None, images, labels, phm_enabled=True):
    """Mean cross-entropy of a batch and gradients for classifier and matcher parameters.

    Returns ``(loss, grads, logits)``; ``grads[PHM_KEY]`` holds the matcher
    gradient when that path is enabled.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    b = images.shape[0]
    x, cache = preprocess(images, pc if phm_enabled else None, model.input_size)
    logits, mcache = model.forward(x)
    losses, g_logits = cross_entropy(logits, labels)
    grads, g_x = model.backward(g_logits / b, mcache)
    if phm_enabled:
        h, w = images.shape[-2:]
        g_img = resize_bilinear_backward(g_x, h, w)
        grads[PHM_KEY] = phm_backward(g_img, cache, pc)
    return float(np.mean(losses)), grads, logits


def _check_dataset(samples, num_classes: int | None):
    if len(samples) == 0:
        raise ValueError("empty dataset")
    images, labels = stack(samples)
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    missing = sorted(set(range(k)) - set(labels.tolist()))
    if missing:
        raise ValueError(f"classes without samples: {missing}")
    if images.shape[1] != 3:
        raise ValueError(f"expected 3-channel images, got {images.shape[1]}")
    return images, labels, k


def train(samples, config: TrainConfig = TrainConfig(), num_classes: int | None = None) -> TrainResult:
    """Train from scratch; fully determined by ``config.seed``."""
    images, labels, k = _check_dataset(samples, num_classes)
    n = len(labels)
    rng = np.random.default_rng(config.seed)
    model = TinyClassifier(k, config.input_size, rng=rng)
    pc = init_linear_ramp(images.shape[1], config.size)
    params = dict(model.params)
    if config.phm_enabled:
        params[PHM_KEY] = pc.params
    state = SgdState(config.lr, config.momentum, config.weight_decay)

    history = []
    for epoch in range(1, config.epochs + 1):
        state.lr = lr_at(epoch, config.lr, config.lr_drops)
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        batch_losses = []
        gnorm = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = images[idx]
            if config.augment:
                flip = rng.random(len(idx)) < 0.5
                batch = np.where(flip[:, None, None, None], batch[..., ::-1], batch)
            loss, grads, logits = composite_loss(model, pc, batch, labels[idx], config.phm_enabled)
            if config.phm_enabled:
                gnorm = max(gnorm, float(np.abs(grads[PHM_KEY]).max()))
            sgd_step(params, grads, state)
            batch_losses.append(loss)
            total_loss += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=1) == labels[idx]))
        m = EpochMetrics(epoch, total_loss / n, correct / n, state.lr, batch_losses, gnorm)
        log.info("epoch %d loss %.4f acc %.4f lr %g", epoch, m.loss, m.train_acc, m.lr)
        history.append(m)
    return TrainResult(model, pc, history)


def evaluate(model: TinyClassifier, pc: ParamContainer | None, samples, phm_enabled: bool = True,
             degradation: DegradeSpec | None = None, seed: int = 0, batch_size: int = 256) -> float:
    """Top-1 accuracy; argmax ties go to the smallest class index."""
    if len(samples) == 0:
        raise ValueError("empty dataset")
    if phm_enabled and pc is None:
        raise ValueError("phm_enabled requires a ParamContainer")
    images, labels = stack(samples)
    if degradation is not None:
        images = np.stack([degrade(im, degradation, seed=(seed, i)) for i, im in enumerate(images)])
    correct = 0
    for start in range(0, len(labels), batch_size):
        batch = images[start:start + batch_size]
        x, _ = preprocess(batch, pc if phm_enabled else None, model.input_size)
        correct += int(np.sum(model.predict(x) == labels[start:start + batch_size]))
    return correct / len(labels)


def write_metrics_csv(history, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "train_acc", "lr"])
        for m in history:
            w.writerow([m.epoch, repr(m.loss), repr(m.train_acc), repr(m.lr)])
