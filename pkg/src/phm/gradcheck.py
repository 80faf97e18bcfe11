"""Central finite differences for checking analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["central_difference", "relative_error"]


def central_difference(f: Callable[[], float], x: np.ndarray, eps: float = 1e-3, index=None) -> np.ndarray:
    """``(f(x + eps) - f(x - eps)) / 2eps`` per element, perturbing ``x`` in place.

    ``f`` takes no arguments and must read ``x`` itself. If ``index`` is given
    (an iterable of index tuples), only those entries are computed and the
    rest stay NaN.
    """
    out = np.full(x.shape, np.nan)
    for i in (np.ndindex(x.shape) if index is None else index):
        orig = x[i]
        x[i] = orig + eps
        fp = f()
        x[i] = orig - eps
        fm = f()
        x[i] = orig
        out[i] = (fp - fm) / (2.0 * eps)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Elementwise ``|a - n| / |n|``; where ``|n| < floor`` the absolute error is returned instead."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(analytic - numeric)
    scale = np.abs(numeric)
    return np.where(scale < floor, diff, diff / np.where(scale < floor, 1.0, scale))
