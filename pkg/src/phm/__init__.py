"""Differentiable parametric histogram matching.

The :mod:`phm.matcher` module holds the trainable preprocessing layer;
:mod:`phm.classic` the conventional histogram equalization and matching it
generalizes; :mod:`phm.train` joint training with a small classifier.
"""
from .classic import apply_lut, cdf, equalize, histogram, match_histograms, match_lut, uniform_cdf
from .errors import FormatError, ShapeError
from .image import flatten_channel, load_ppm, resize_bilinear, save_ppm
from .matcher import (ParamContainer, SortCache, init_linear_ramp, load_params, phm_backward, phm_forward,
                      save_params, sort_with_indices, upsample_linear)

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "ShapeError",
    "ParamContainer",
    "SortCache",
    "apply_lut",
    "cdf",
    "equalize",
    "flatten_channel",
    "histogram",
    "init_linear_ramp",
    "load_params",
    "load_ppm",
    "match_histograms",
    "match_lut",
    "phm_backward",
    "phm_forward",
    "resize_bilinear",
    "save_params",
    "save_ppm",
    "sort_with_indices",
    "uniform_cdf",
    "upsample_linear",
]
