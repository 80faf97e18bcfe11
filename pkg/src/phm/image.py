"""Image arrays, 8-bit PPM I/O and bilinear resizing.

Images are plain ``float64`` numpy arrays of shape ``(C, H, W)`` with values
in ``[0, 1]`` (channel-planar, row-major). Functions that take batches accept
any number of leading axes in front of ``(H, W)``.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from .errors import FormatError, ShapeError

__all__ = [
    "as_image",
    "to_bytes",
    "load_ppm",
    "save_ppm",
    "flatten_channel",
    "unflatten_channel",
    "resize_bilinear",
    "resize_bilinear_backward",
]


def as_image(data, *, copy: bool = False) -> np.ndarray:
    """Validate ``data`` as a ``(C, H, W)`` image in ``[0, 1]`` and return it as float64."""
    arr = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ShapeError(f"expected a non-empty (C, H, W) array, got shape {arr.shape}")
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ValueError("image values must lie in [0, 1]")
    return arr


def to_bytes(image: np.ndarray) -> np.ndarray:
    """Quantize to uint8 with round-half-up, clamped to [0, 255]."""
    q = np.floor(np.asarray(image, dtype=np.float64) * 255.0 + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)


def _read_token(buf: bytes, pos: int, field: str) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(f"PPM header truncated: missing {field}")
    return buf[start:pos], pos


def _parse_int(tok: bytes, field: str) -> int:
    try:
        value = int(tok.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise FormatError(f"PPM header: invalid {field} {tok!r}") from None
    return value


def load_ppm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary P6 file with maxval 255 into a ``(3, H, W)`` float image."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_token(buf, 0, "magic")
    if magic != b"P6":
        raise FormatError(f"{path}: bad magic {magic!r}, expected b'P6'")
    width, pos = _read_token(buf, pos, "width")
    height, pos = _read_token(buf, pos, "height")
    maxval, pos = _read_token(buf, pos, "maxval")
    w, h, m = _parse_int(width, "width"), _parse_int(height, "height"), _parse_int(maxval, "maxval")
    if w < 1:
        raise FormatError(f"{path}: invalid width {w}")
    if h < 1:
        raise FormatError(f"{path}: invalid height {h}")
    if m != 255:
        raise FormatError(f"{path}: unsupported maxval {m}, only 255 is supported")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after maxval")
    pos += 1
    need = 3 * w * h
    pixels = buf[pos:pos + need]
    if len(pixels) < need:
        raise FormatError(f"{path}: pixel data truncated ({len(pixels)} of {need} bytes)")
    raw = np.frombuffer(pixels, dtype=np.uint8).reshape(h, w, 3)
    return np.ascontiguousarray(raw.transpose(2, 0, 1), dtype=np.float64) / 255.0


def save_ppm(image: np.ndarray, path: str | os.PathLike) -> None:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"save_ppm needs a (3, H, W) image, got shape {image.shape}")
    _, h, w = image.shape
    body = to_bytes(image).transpose(1, 2, 0).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (w, h))
            fh.write(body)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write PPM: {exc.strerror}", str(path)) from exc


def flatten_channel(image: np.ndarray, c: int) -> np.ndarray:
    """Channel ``c`` as a 1-D vector; pixel (h, w) lands at index ``h * W + w``."""
    image = np.asarray(image)
    if not 0 <= c < image.shape[0]:
        raise IndexError(f"channel {c} out of range for {image.shape[0]} channels")
    return image[c].reshape(-1).copy()


def unflatten_channel(vector: np.ndarray, height: int, width: int) -> np.ndarray:
    return np.asarray(vector).reshape(height, width)


@lru_cache(maxsize=64)
def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    # half-pixel centers, edge clamped
    dst = np.arange(n_out, dtype=np.float64)
    src = np.clip((dst + 0.5) * (n_in / n_out) - 0.5, 0.0, n_in - 1)
    x0 = np.floor(src).astype(np.intp)
    x1 = np.minimum(x0 + 1, n_in - 1)
    frac = src - x0
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(mat, (rows, x0), 1.0 - frac)
    np.add.at(mat, (rows, x1), frac)
    mat.setflags(write=False)
    return mat


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize over the last two axes.

    Source coordinates follow ``src = (dst + 0.5) * in / out - 0.5`` with
    clamping at the borders, so every output is a convex combination of
    input pixels.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    image = np.asarray(image, dtype=np.float64)
    in_h, in_w = image.shape[-2:]
    ry = _interp_matrix(in_h, out_h)
    rx = _interp_matrix(in_w, out_w)
    out = ry @ image @ rx.T
    return np.clip(out, 0.0, 1.0, out=out)


def resize_bilinear_backward(grad: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    """Gradient of :func:`resize_bilinear` w.r.t. its input (transpose of the interpolation)."""
    grad = np.asarray(grad, dtype=np.float64)
    out_h, out_w = grad.shape[-2:]
    ry = _interp_matrix(in_h, out_h)
    rx = _interp_matrix(in_w, out_w)
    return ry.T @ grad @ rx
