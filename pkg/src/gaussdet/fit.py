"""Moment fitting of the five-parameter Gaussian to an object's pixels."""

from __future__ import annotations

import enum
from typing import Iterable

import numpy as np

from gaussdet.core import RHO_MAX, BoundingBox, Gaussian2D, PixelSet
from gaussdet.errors import EmptyPixelSet

# Variance floor keeps single-pixel and perfectly collinear annotations
# strictly positive definite.
VAR_FLOOR = 1e-4

# Variance of a uniform distribution over a unit-width pixel.
UNIT_PIXEL_VAR = 1.0 / 12.0


class Correction(enum.Enum):
    """Optional variance correction applied before the regularization floor."""

    NONE = "none"
    UNIT_PIXEL = "unit_pixel"


def _as_pixel_array(pixels: PixelSet | Iterable) -> np.ndarray:
    if isinstance(pixels, PixelSet):
        return pixels.array
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.size == 0:
        raise EmptyPixelSet("cannot fit an empty pixel set")
    return arr


def fit_gaussian(
    pixels: PixelSet | Iterable, correction: Correction = Correction.NONE
) -> Gaussian2D:
    """Maximum-likelihood Gaussian of a pixel set.

    Means are sample means, variances and the cross moment are population
    (divide by N) moments computed on pixel centers. Each variance gets the
    VAR_FLOOR regularizer, plus 1/12 px^2 first when the unit-pixel
    correction is requested; rho is the regularized correlation clamped
    into the valid open interval.
    """
    arr = _as_pixel_array(pixels).astype(np.float64)
    mean = arr.mean(axis=0)
    centered = arr - mean
    var_x = float(np.mean(centered[:, 0] ** 2))
    var_y = float(np.mean(centered[:, 1] ** 2))
    cov_xy = float(np.mean(centered[:, 0] * centered[:, 1]))
    if correction is Correction.UNIT_PIXEL:
        var_x += UNIT_PIXEL_VAR
        var_y += UNIT_PIXEL_VAR
    var_x += VAR_FLOOR
    var_y += VAR_FLOOR
    sigma_x = float(np.sqrt(var_x))
    sigma_y = float(np.sqrt(var_y))
    rho = cov_xy / (sigma_x * sigma_y)
    rho = float(np.clip(rho, -RHO_MAX, RHO_MAX))
    return Gaussian2D(float(mean[0]), float(mean[1]), sigma_x, sigma_y, rho)


def bbox_of(pixels: PixelSet | Iterable) -> BoundingBox:
    """Tight axis-aligned box treating each pixel as a unit square."""
    arr = _as_pixel_array(pixels)
    return BoundingBox(
        float(arr[:, 0].min()),
        float(arr[:, 1].min()),
        float(arr[:, 0].max()) + 1.0,
        float(arr[:, 1].max()) + 1.0,
    )
