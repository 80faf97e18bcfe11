"""Classical 8-bit histogram, CDF, equalization and CDF-matching LUTs.

Real-valued pixels are assigned to bin ``round(v * 255)`` (half up), clamped
to ``[0, 255]``; this is the same quantization used when writing PPM files.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "NBINS",
    "bin_index",
    "histogram",
    "cdf",
    "uniform_cdf",
    "match_lut",
    "apply_lut",
    "image_cdfs",
    "equalize",
    "match_histograms",
]

NBINS = 256


def bin_index(values: np.ndarray) -> np.ndarray:
    q = np.floor(np.asarray(values, dtype=np.float64) * (NBINS - 1) + 0.5)
    return np.clip(q, 0, NBINS - 1).astype(np.intp)


def histogram(channel: np.ndarray) -> np.ndarray:
    """Counts per bin (length 256, int64) for one flattened channel."""
    channel = np.asarray(channel).ravel()
    if channel.size == 0:
        raise ValueError("histogram of an empty channel is undefined")
    return np.bincount(bin_index(channel), minlength=NBINS).astype(np.int64)


def cdf(hist: np.ndarray) -> np.ndarray:
    hist = np.asarray(hist)
    total = hist.sum()
    if total <= 0:
        raise ValueError("cdf needs a histogram with a positive total")
    return np.cumsum(hist, dtype=np.float64) / total


def uniform_cdf() -> np.ndarray:
    """CDF of the flat 256-bin distribution, ``(q + 1) / 256``."""
    return (np.arange(NBINS, dtype=np.float64) + 1.0) / NBINS


def match_lut(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """For every source level ``p``, the smallest ``q`` minimizing ``|target[q] - source[p]|``.

    ``np.argmin`` returns the first minimum, which is the same tie rule as a
    scan that only accepts strict improvements.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != (NBINS,) or target.shape != (NBINS,):
        raise ShapeError(f"CDFs must have {NBINS} entries, got {source.shape} and {target.shape}")
    dist = np.abs(target[None, :] - source[:, None])
    return np.argmin(dist, axis=1).astype(np.int64)


def apply_lut(image: np.ndarray, luts) -> np.ndarray:
    """Replace each pixel's bin ``p`` with ``lut[p] / 255``, one LUT per channel."""
    image = np.asarray(image, dtype=np.float64)
    luts = np.asarray(luts)
    if luts.ndim != 2 or luts.shape[0] != image.shape[0] or luts.shape[1] != NBINS:
        raise ShapeError(
            f"need one {NBINS}-entry LUT per channel ({image.shape[0]}), got shape {luts.shape}"
        )
    bins = bin_index(image)
    out = np.empty_like(image)
    for c in range(image.shape[0]):
        out[c] = luts[c][bins[c]] / (NBINS - 1)
    return out


def image_cdfs(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    return np.stack([cdf(histogram(image[c])) for c in range(image.shape[0])])


def equalize(image: np.ndarray) -> np.ndarray:
    """Histogram equalization: per-channel matching to the uniform CDF."""
    target = uniform_cdf()
    luts = [match_lut(f, target) for f in image_cdfs(image)]
    return apply_lut(image, luts)


def match_histograms(source: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Conventional HM of ``source`` onto the per-channel CDFs of ``reference``."""
    source = np.asarray(source)
    reference = np.asarray(reference)
    if source.shape[0] != reference.shape[0]:
        raise ShapeError(
            f"channel mismatch: source has {source.shape[0]}, reference {reference.shape[0]}"
        )
    luts = [match_lut(fs, ft) for fs, ft in zip(image_cdfs(source), image_cdfs(reference))]
    return apply_lut(source, luts)
