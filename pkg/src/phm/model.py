"""Small fixed CNN with hand-written reverse mode.

Architecture: conv3x3(3->8, pad 1) -> ReLU -> 2x2 avg pool -> conv3x3(8->16,
pad 1) -> ReLU -> global avg pool -> linear(16->K). Inputs are batches of
shape ``(B, 3, H, W)`` with even ``H`` and ``W`` (32x32 in training).
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import count

import numpy as np

from .errors import FormatError, ShapeError

__all__ = [
    "param_shapes",
    "TinyClassifier",
    "ForwardCache",
    "classifier_forward",
    "classifier_backward",
    "cross_entropy",
    "save_model",
    "load_model",
]

MAGIC = "TCN1"
INPUT_CHANNELS = 3


def param_shapes(num_classes: int) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes in declaration (file) order."""
    return {
        "conv1.weight": (8, INPUT_CHANNELS, 3, 3),
        "conv1.bias": (8,),
        "conv2.weight": (16, 8, 3, 3),
        "conv2.bias": (16,),
        "fc.weight": (num_classes, 16),
        "fc.bias": (num_classes,),
    }


_FAN_IN = {"conv1": INPUT_CHANNELS * 9, "conv2": 8 * 9, "fc": 16}
_tokens = count()


class TinyClassifier:
    def __init__(self, num_classes: int = 10, input_size: int = 32, rng=None):
        if num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if input_size < 2 or input_size % 2:
            raise ValueError(f"input_size must be even and >= 2, got {input_size}")
        self.num_classes = num_classes
        self.input_size = input_size
        self.params = {k: np.zeros(v) for k, v in param_shapes(num_classes).items()}
        self._token = None
        if rng is not None:
            self.reset_parameters(rng)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        """Uniform in +-sqrt(1/fan_in) for every weight and bias, drawn in declaration order."""
        for name, arr in self.params.items():
            bound = np.sqrt(1.0 / _FAN_IN[name.split(".")[0]])
            arr[...] = rng.uniform(-bound, bound, size=arr.shape)

    def forward(self, x):
        return classifier_forward(x, self)

    def backward(self, grad_logits, cache):
        return classifier_backward(grad_logits, cache, self)

    def predict(self, x) -> np.ndarray:
        logits, _ = classifier_forward(x, self)
        return np.argmax(logits, axis=-1)


@dataclass
class ForwardCache:
    token: int
    batched: bool
    cols1: np.ndarray
    z1: np.ndarray
    cols2: np.ndarray
    z2: np.ndarray
    feat: np.ndarray


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B, C*9, H*W) patches for a 3x3 kernel with zero padding 1."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    # win: (B, C, H, W, 3, 3) -> (B, C, 3, 3, H, W)
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * 9, h * w)


def _col2im(cols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    b = cols.shape[0]
    cols = cols.reshape(b, c, 3, 3, h, w)
    xp = np.zeros((b, c, h + 2, w + 2))
    for dy in range(3):
        for dx in range(3):
            xp[:, :, dy:dy + h, dx:dx + w] += cols[:, :, dy, dx]
    return xp[:, :, 1:-1, 1:-1]


def classifier_forward(x: np.ndarray, model: TinyClassifier):
    """Logits for one image ``(3, H, W)`` or a batch ``(B, 3, H, W)``, plus the activation cache."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 4
    if not batched:
        x = x[None]
    n = model.input_size
    if x.ndim != 4 or x.shape[1:] != (INPUT_CHANNELS, n, n):
        raise ShapeError(f"expected input (B, {INPUT_CHANNELS}, {n}, {n}), got {x.shape}")
    p = model.params
    b = x.shape[0]

    cols1 = _im2col(x)
    z1 = p["conv1.weight"].reshape(8, -1) @ cols1 + p["conv1.bias"][:, None]
    a1 = np.maximum(z1, 0.0).reshape(b, 8, n, n)
    h2 = n // 2
    pooled = a1.reshape(b, 8, h2, 2, h2, 2).mean(axis=(3, 5))

    cols2 = _im2col(pooled)
    z2 = p["conv2.weight"].reshape(16, -1) @ cols2 + p["conv2.bias"][:, None]
    feat = np.maximum(z2, 0.0).mean(axis=2)
    logits = feat @ p["fc.weight"].T + p["fc.bias"]

    token = next(_tokens)
    model._token = token
    cache = ForwardCache(token, batched, cols1, z1, cols2, z2, feat)
    return (logits if batched else logits[0]), cache


def classifier_backward(grad_logits: np.ndarray, cache: ForwardCache, model: TinyClassifier):
    """Reverse pass. Returns ``(grads, grad_input)``; ``grads`` is keyed like ``model.params``.

    The cache must come from the most recent forward call on ``model``.
    """
    if cache.token != model._token:
        raise RuntimeError("stale forward cache: run classifier_forward again before backward")
    g = np.asarray(grad_logits, dtype=np.float64)
    if not cache.batched:
        g = g[None]
    p = model.params
    b = cache.feat.shape[0]
    if g.shape != (b, model.num_classes):
        raise ShapeError(f"grad_logits shape {g.shape} does not match logits ({b}, {model.num_classes})")
    n = model.input_size
    h2 = n // 2
    grads = {}

    grads["fc.weight"] = g.T @ cache.feat
    grads["fc.bias"] = g.sum(axis=0)
    g_feat = g @ p["fc.weight"]

    hw2 = h2 * h2
    g_z2 = np.where(cache.z2 > 0.0, g_feat[:, :, None] / hw2, 0.0)
    grads["conv2.weight"] = np.tensordot(g_z2, cache.cols2, axes=([0, 2], [0, 2])).reshape(p["conv2.weight"].shape)
    grads["conv2.bias"] = g_z2.sum(axis=(0, 2))
    g_cols2 = p["conv2.weight"].reshape(16, -1).T @ g_z2
    g_pooled = _col2im(g_cols2, 8, h2, h2)

    g_a1 = np.repeat(np.repeat(g_pooled, 2, axis=2), 2, axis=3) * 0.25
    g_z1 = np.where(cache.z1 > 0.0, g_a1.reshape(b, 8, n * n), 0.0)
    grads["conv1.weight"] = np.tensordot(g_z1, cache.cols1, axes=([0, 2], [0, 2])).reshape(p["conv1.weight"].shape)
    grads["conv1.bias"] = g_z1.sum(axis=(0, 2))
    g_cols1 = p["conv1.weight"].reshape(8, -1).T @ g_z1
    g_input = _col2im(g_cols1, INPUT_CHANNELS, n, n)

    return grads, (g_input if cache.batched else g_input[0])


def cross_entropy(logits: np.ndarray, label):
    """Softmax cross-entropy and its gradient w.r.t. the logits.

    Works for one sample (``logits`` of shape ``(K,)``, integer label) or a
    batch (``(B, K)`` with a label array); batched losses are per sample.
    """
    logits = np.asarray(logits, dtype=np.float64)
    label = np.asarray(label)
    k = logits.shape[-1]
    if np.any(label < 0) or np.any(label >= k):
        raise IndexError(f"label out of range for {k} classes")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_prob = shifted - log_z
    onehot = np.eye(k)[label]
    loss = -(log_prob * onehot).sum(axis=-1)
    grad = np.exp(log_prob) - onehot
    return (float(loss) if loss.ndim == 0 else loss), grad


def save_model(model: TinyClassifier, path: str | os.PathLike) -> None:
    """TCN1 text format: ``TCN1 <K>`` then every weight, one float per line, in declaration order."""
    lines = [f"{MAGIC} {model.num_classes}"]
    for arr in model.params.values():
        lines.extend(repr(float(v)) for v in arr.ravel())
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str | os.PathLike) -> TinyClassifier:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 2 or head[0] != MAGIC:
        raise FormatError(f"{path}:1: bad header, expected '{MAGIC} <K>'")
    try:
        k = int(head[1])
    except ValueError:
        raise FormatError(f"{path}:1: non-integer class count {head[1]!r}") from None
    model = TinyClassifier(k)
    need = sum(a.size for a in model.params.values())
    if len(lines) - 1 != need:
        raise FormatError(f"{path}: expected {need} values for K={k}, found {len(lines) - 1}")
    values = np.empty(need)
    for i, line in enumerate(lines[1:]):
        try:
            values[i] = float(line)
        except ValueError:
            raise FormatError(f"{path}:{i + 2}: cannot parse float {line!r}") from None
    pos = 0
    for arr in model.params.values():
        arr[...] = values[pos:pos + arr.size].reshape(arr.shape)
        pos += arr.size
    return model
