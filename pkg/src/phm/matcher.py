"""Differentiable parametric histogram matching.

Each channel of the input is flattened and stably sorted. A trainable vector
of ``s`` values per channel is linearly resampled to the pixel count, then
the k-th resampled value is written to the position of the k-th smallest
pixel and clipped to ``[0, 1]``. The output therefore always has the same
sorted values whatever the input, and only the ranks of the input pixels
matter.

The backward pass routes each output gradient to the two parameters that were
interpolated for its rank. The gradient with respect to the input pixels is
zero almost everywhere and is not computed.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FormatError, ShapeError

__all__ = [
    "DEFAULT_SIZE",
    "ParamContainer",
    "SortCache",
    "init_linear_ramp",
    "stable_argsort",
    "sort_with_indices",
    "interp_weights",
    "upsample_linear",
    "phm_forward",
    "phm_backward",
    "save_params",
    "load_params",
    "format_params",
    "parse_params",
]

DEFAULT_SIZE = 2048
MAGIC = "PHM1"


@dataclass
class ParamContainer:
    """Trainable target distribution, one row of ``size`` values per channel.

    Values are unconstrained: they may leave ``[0, 1]`` or become unsorted
    during training; the forward pass clips the output.
    """

    params: np.ndarray

    def __post_init__(self):
        self.params = np.array(self.params, dtype=np.float64)
        if self.params.ndim != 2:
            raise ShapeError(f"params must be (C, s), got shape {self.params.shape}")
        if self.params.shape[0] < 1:
            raise ShapeError("need at least one channel")
        if self.params.shape[1] < 2:
            raise ValueError(f"parameter size must be >= 2, got {self.params.shape[1]}")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("params must be finite")

    @property
    def channels(self) -> int:
        return self.params.shape[0]

    @property
    def size(self) -> int:
        return self.params.shape[1]

    def copy(self) -> "ParamContainer":
        return ParamContainer(self.params.copy())


@dataclass
class SortCache:
    """What :func:`phm_backward` needs from a forward call.

    ``perm[..., c, k]`` is the flat position of the k-th smallest pixel of
    channel ``c``. ``lower`` and ``weight`` give, per rank, the lower
    parameter index and the interpolation weight of the upper one.
    ``clipmask[..., c, k]`` is True where the resampled value was strictly
    inside (0, 1), i.e. where gradient passes the clip.
    """

    perm: np.ndarray
    lower: np.ndarray
    weight: np.ndarray
    clipmask: np.ndarray
    shape: tuple
    size: int


def init_linear_ramp(channels: int, size: int = DEFAULT_SIZE) -> ParamContainer:
    """Parameters rising linearly from 0 to 1, identical for every channel."""
    if size < 2:
        raise ValueError(f"parameter size must be >= 2, got {size}")
    ramp = np.arange(size, dtype=np.float64) / (size - 1)
    return ParamContainer(np.tile(ramp, (channels, 1)))


def _flat_index(perm: np.ndarray) -> np.ndarray:
    """Row-wise indices of ``perm`` (last axis) turned into indices of the flattened array."""
    m = perm.shape[-1]
    rows = perm.size // m if m else 0
    return (perm.reshape(rows, m) + (np.arange(rows) * m)[:, None]).reshape(perm.shape)


def _gather(x: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return x.reshape(-1)[_flat_index(perm)]


def _scatter(values: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty(perm.shape)
    out.reshape(-1)[_flat_index(perm)] = values
    return out


def stable_argsort(x: np.ndarray) -> np.ndarray:
    """Stable ascending argsort along the last axis.

    Equivalent to ``np.argsort(x, axis=-1, kind="stable")`` but faster for
    image-sized rows: an unstable sort is done first and, only if ties
    exist, the dense ranks are stably re-sorted as integers.
    """
    x = np.asarray(x)
    m = x.shape[-1]
    order = np.argsort(x, axis=-1, kind="quicksort")
    if m < 2:
        return order
    flat = _flat_index(order)
    xs = x.reshape(-1)[flat].reshape(x.shape)
    ties = xs[..., 1:] == xs[..., :-1]
    if not ties.any():
        return order
    dense = np.zeros(x.shape, dtype=np.int64)
    np.cumsum(~ties, axis=-1, out=dense[..., 1:])
    rank = np.empty_like(dense)
    rank.reshape(-1)[flat] = dense
    if dense[..., -1].max() < 1 << 16:
        # numpy radix-sorts 16-bit keys for kind="stable"
        return np.argsort(rank.astype(np.uint16), axis=-1, kind="stable")
    key = rank * m + np.arange(m)
    key.sort(axis=-1)
    return key % m


def sort_with_indices(channel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable sort of a 1-D channel: ``(sorted_values, perm)`` with ``sorted = channel[perm]``."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.size == 0:
        raise ValueError("cannot sort an empty channel")
    perm = stable_argsort(channel)
    return channel[perm], perm


@lru_cache(maxsize=32)
def interp_weights(size: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Align-corners resampling of ``size`` knots onto ``m`` points.

    Returns ``(lower, weight)`` so that point k is
    ``(1 - weight[k]) * p[lower[k]] + weight[k] * p[lower[k] + 1]``.
    """
    if size < 2:
        raise ValueError(f"parameter size must be >= 2, got {size}")
    if m < 1:
        raise ValueError(f"output length must be >= 1, got {m}")
    if m == 1:
        t = np.zeros(1)
    else:
        t = np.arange(m, dtype=np.float64) * (size - 1) / (m - 1)
    lower = np.minimum(np.floor(t).astype(np.intp), size - 2)
    weight = t - lower
    lower.setflags(write=False)
    weight.setflags(write=False)
    return lower, weight


def upsample_linear(params: np.ndarray, m: int) -> np.ndarray:
    """Linearly resample the last axis of ``params`` to length ``m`` (also downsamples)."""
    params = np.asarray(params, dtype=np.float64)
    lower, weight = interp_weights(params.shape[-1], m)
    return params[..., lower] * (1.0 - weight) + params[..., lower + 1] * weight


def phm_forward(image: np.ndarray, pc: ParamContainer) -> tuple[np.ndarray, SortCache]:
    """Impose the container's target distribution on ``image``.

    ``image`` is ``(C, H, W)`` or a batch ``(B, C, H, W)``; the output has the
    same shape.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim < 3:
        raise ShapeError(f"expected (C, H, W) or (B, C, H, W), got shape {image.shape}")
    c = image.shape[-3]
    if c != pc.channels:
        raise ShapeError(f"image has {c} channels but the container has {pc.channels}")
    m = image.shape[-2] * image.shape[-1]
    flat = image.reshape(image.shape[:-2] + (m,))
    perm = stable_argsort(flat)
    lower, weight = interp_weights(pc.size, m)
    target = pc.params[:, lower] * (1.0 - weight) + pc.params[:, lower + 1] * weight
    clipmask = (target > 0.0) & (target < 1.0)
    values = np.broadcast_to(np.clip(target, 0.0, 1.0), flat.shape)
    out = _scatter(values, perm)
    cache = SortCache(
        perm=perm,
        lower=lower,
        weight=weight,
        clipmask=np.broadcast_to(clipmask, flat.shape),
        shape=image.shape,
        size=pc.size,
    )
    return out.reshape(image.shape), cache


def phm_backward(grad_output: np.ndarray, cache: SortCache, pc: ParamContainer) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. ``pc.params`` given ``dL/doutput``.

    Batched caches are summed over the batch axis; scaling (e.g. averaging)
    is left to the caller.
    """
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != cache.shape:
        raise ShapeError(f"grad shape {grad_output.shape} does not match forward shape {cache.shape}")
    if pc.size != cache.size or pc.channels != cache.shape[-3]:
        raise ShapeError("container does not match the one used in the forward pass")
    flat = grad_output.reshape(cache.perm.shape)
    g = _gather(np.ascontiguousarray(flat), cache.perm)
    g = np.where(cache.clipmask, g, 0.0)
    g = g.reshape((-1,) + g.shape[-2:]).sum(axis=0)
    s = pc.size
    grad = np.empty((pc.channels, s))
    hi = cache.lower + 1
    for c in range(pc.channels):
        grad[c] = np.bincount(cache.lower, g[c] * (1.0 - cache.weight), minlength=s)
        grad[c] += np.bincount(hi, g[c] * cache.weight, minlength=s)
    return grad


def format_params(pc: ParamContainer) -> str:
    lines = [f"{MAGIC} {pc.channels} {pc.size}"]
    lines.extend(repr(float(v)) for v in pc.params.ravel())
    return "\n".join(lines) + "\n"


def parse_params(text: str, source: str = "<string>") -> ParamContainer:
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{source}:1: empty file, expected '{MAGIC} <C> <s>' header")
    head = lines[0].split()
    if len(head) != 3 or head[0] != MAGIC:
        raise FormatError(f"{source}:1: bad magic/header {lines[0]!r}, expected '{MAGIC} <C> <s>'")
    try:
        c, s = int(head[1]), int(head[2])
    except ValueError:
        raise FormatError(f"{source}:1: non-integer channel count or size in {lines[0]!r}") from None
    if c < 1 or s < 2:
        raise FormatError(f"{source}:1: invalid channel count {c} or size {s}")
    body = lines[1:]
    if len(body) != c * s:
        raise FormatError(f"{source}:{len(lines) + 1}: expected {c * s} values, found {len(body)}")
    values = np.empty(c * s)
    for i, line in enumerate(body):
        try:
            values[i] = float(line)
        except ValueError:
            raise FormatError(f"{source}:{i + 2}: cannot parse float {line!r}") from None
    try:
        return ParamContainer(values.reshape(c, s))
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def save_params(pc: ParamContainer, path: str | os.PathLike) -> None:
    """Write the PHM1 text format: header ``PHM1 <C> <s>``, then one float per line."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_params(pc))


def load_params(path: str | os.PathLike) -> ParamContainer:
    with open(path, encoding="ascii") as fh:
        return parse_params(fh.read(), str(path))
