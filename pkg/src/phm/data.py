"""Synthetic shape dataset, closed-form degradations and directory I/O.

Classes are (shape, hue band) pairs: label ``l`` uses shape ``l % 5`` and
hue band ``l // 5``. Images are 3x64x64 and quantized to 8 bits so that PPM
export and reload is lossless.
"""
from __future__ import annotations

import colorsys
import os
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .image import load_ppm, resize_bilinear, save_ppm, to_bytes

__all__ = [
    "SHAPES",
    "HUE_BANDS",
    "DEGRADE_KINDS",
    "LabeledSample",
    "DegradeSpec",
    "class_name",
    "render_sample",
    "generate_shapes_dataset",
    "degrade",
    "degrade_dataset",
    "split",
    "stack",
    "save_dataset",
    "load_dataset",
]

SHAPES = ("circle", "square", "triangle", "cross", "ring")
HUE_BANDS = ((0.0, 0.09, "warm"), (0.55, 0.68, "cool"))
DEGRADE_KINDS = ("lowlight", "fog", "sand", "snow-noise")
SAND_TINT = np.array([1.0, 0.85, 0.6])
IMAGE_SIZE = 64


class LabeledSample(NamedTuple):
    image: np.ndarray
    label: int


@dataclass(frozen=True)
class DegradeSpec:
    kind: str
    severity: float

    def __post_init__(self):
        if self.kind not in DEGRADE_KINDS:
            raise ValueError(f"unknown degradation {self.kind!r}; choose from {', '.join(DEGRADE_KINDS)}")
        if not 0.0 <= self.severity <= 1.0:
            raise ValueError(f"severity must be in [0, 1], got {self.severity}")

    @classmethod
    def parse(cls, text: str) -> "DegradeSpec":
        """Parse ``kind:severity``, e.g. ``fog:0.7``."""
        kind, sep, sev = text.rpartition(":")
        if not sep:
            raise ValueError(f"expected kind:severity, got {text!r}")
        try:
            severity = float(sev)
        except ValueError:
            raise ValueError(f"bad severity in {text!r}") from None
        return cls(kind, severity)

    def __str__(self):
        return f"{self.kind}:{self.severity:g}"


def class_name(label: int) -> str:
    return f"{label:02d}_{SHAPES[label % 5]}_{HUE_BANDS[label // 5][2]}"


def _shape_mask(shape: str, u: np.ndarray, v: np.ndarray, r: float) -> np.ndarray:
    if shape == "circle":
        return u * u + v * v <= r * r
    if shape == "square":
        return np.maximum(np.abs(u), np.abs(v)) <= 0.8 * r
    if shape == "triangle":
        # equilateral, circumradius r, apex along -v
        m = np.ones(u.shape, dtype=bool)
        for ang in (np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3):
            m &= u * np.cos(ang) - v * np.sin(ang) <= 0.5 * r
        return m
    if shape == "cross":
        arm = 0.3 * r
        return ((np.abs(u) <= arm) & (np.abs(v) <= r)) | ((np.abs(v) <= arm) & (np.abs(u) <= r))
    if shape == "ring":
        d2 = u * u + v * v
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    raise ValueError(f"unknown shape {shape!r}")


def render_sample(label: int, rng: np.random.Generator, size: int = IMAGE_SIZE) -> np.ndarray:
    """Draw one image of class ``label`` on a random smooth textured background."""
    # background: low-saturation smooth field plus fine grain
    base = rng.uniform(0.15, 0.85)
    tint = rng.uniform(-0.08, 0.08, size=3)
    coarse = rng.uniform(-1.0, 1.0, size=(3, 6, 6))
    field = resize_bilinear((coarse + 1.0) / 2.0, size, size) * 2.0 - 1.0
    contrast = rng.uniform(0.1, 0.3)
    img = base + tint[:, None, None] + contrast * field.mean(axis=0, keepdims=True) + 0.05 * field
    img = img + rng.normal(0.0, 0.03, size=(3, size, size))

    lo, hi, _ = HUE_BANDS[label // 5]
    hue = rng.uniform(lo, hi)
    sat = rng.uniform(0.6, 1.0)
    val = rng.uniform(0.45, 1.0)
    color = np.array(colorsys.hsv_to_rgb(hue, sat, val))

    r = rng.uniform(0.16, 0.3) * size
    cy, cx = rng.uniform(r, size - r, size=2)
    theta = rng.uniform(0.0, 2 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    mask = _shape_mask(SHAPES[label % 5], u, v, r)

    shade = 1.0 + 0.15 * (u / r) + rng.normal(0.0, 0.02, size=(size, size))
    obj = color[:, None, None] * shade
    img = np.where(mask, obj, img)
    return to_bytes(np.clip(img, 0.0, 1.0)) / 255.0


def generate_shapes_dataset(num_classes: int = 10, per_class: int = 100, seed: int = 0,
                            size: int = IMAGE_SIZE) -> list[LabeledSample]:
    """``num_classes * per_class`` samples ordered by class; sample ``i`` uses RNG ``(seed, i)``."""
    if not 1 <= num_classes <= len(SHAPES) * len(HUE_BANDS):
        raise ValueError(f"num_classes must be in [1, {len(SHAPES) * len(HUE_BANDS)}], got {num_classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    out = []
    for label in range(num_classes):
        for j in range(per_class):
            idx = label * per_class + j
            rng = np.random.default_rng([seed, idx])
            out.append(LabeledSample(render_sample(label, rng, size), label))
    return out


def degrade(image: np.ndarray, spec: DegradeSpec, seed: int = 0) -> np.ndarray:
    """Apply a synthetic adverse condition. Severity 0 returns the input unchanged."""
    image = np.asarray(image, dtype=np.float64)
    sev = spec.severity
    if sev == 0.0:
        return image.copy()
    if spec.kind == "lowlight":
        out = (image * (1.0 - 0.8 * sev)) ** (1.0 + 2.0 * sev)
    elif spec.kind == "fog":
        out = image * (1.0 - 0.7 * sev) + 0.7 * sev
    elif spec.kind == "sand":
        a = 0.7 * sev
        out = image * (1.0 - a) + a * SAND_TINT[: image.shape[0], None, None]
    else:
        a = 0.35 * sev
        out = image * (1.0 - a) + a
        rng = np.random.default_rng(seed)
        amp = 0.2 * sev
        out = out + rng.uniform(-amp, amp, size=image.shape)
    return np.clip(out, 0.0, 1.0)


def degrade_dataset(samples, spec: DegradeSpec, seed: int = 0) -> list[LabeledSample]:
    return [LabeledSample(degrade(s.image, spec, seed=(seed, i)), s.label) for i, s in enumerate(samples)]


def split(samples, train_frac: float, seed: int = 0):
    """Stratified split. Each class keeps ``round(n * train_frac)`` samples (at least one on each side)."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(int(s.label), []).append(i)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in sorted(by_class):
        idx = by_class[label]
        if len(idx) < 2:
            raise ValueError(f"class {label} has {len(idx)} sample(s); need at least 2 to split")
        order = rng.permutation(len(idx))
        n_train = min(max(int(round(len(idx) * train_frac)), 1), len(idx) - 1)
        train_idx.extend(idx[k] for k in order[:n_train])
        test_idx.extend(idx[k] for k in order[n_train:])
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


def stack(samples) -> tuple[np.ndarray, np.ndarray]:
    """Batch arrays ``(N, C, H, W)`` and integer labels ``(N,)``."""
    if len(samples) == 0:
        raise ValueError("empty dataset")
    images = np.stack([np.asarray(s.image, dtype=np.float64) for s in samples])
    labels = np.array([int(s.label) for s in samples], dtype=np.int64)
    return images, labels


def save_dataset(samples, root: str | os.PathLike) -> None:
    """Write ``<root>/<class>/<index>.ppm``; class directories sort in label order."""
    root = Path(root)
    for i, s in enumerate(samples):
        d = root / class_name(int(s.label))
        d.mkdir(parents=True, exist_ok=True)
        save_ppm(s.image, d / f"{i:05d}.ppm")


def load_dataset(root: str | os.PathLike) -> list[LabeledSample]:
    """Read a directory-per-class tree; labels follow the lexicographic order of directory names."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    out = []
    for label, name in enumerate(classes):
        for f in sorted((root / name).glob("*.ppm")):
            out.append(LabeledSample(load_ppm(f), label))
    if not out:
        raise ValueError(f"no .ppm images found under {root}")
    return out
