"""Canny edge detection with automatic threshold lowering."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .. import kernels

log = logging.getLogger(__name__)

SIGMA = 1.4
LOW_RATIO = 0.4

_TAN_22_5 = np.tan(np.pi / 8)


def gaussian_kernel(sigma: float = SIGMA) -> np.ndarray:
    radius = int(np.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1)
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def gradients(gray: np.ndarray, sigma: float = SIGMA):
    """Smoothed Sobel gradients ``(gx, gy)`` with rows pointing down."""
    g = gaussian_kernel(sigma)
    smooth = ndimage.correlate1d(np.asarray(gray, dtype=np.float64), g, axis=0, mode="nearest")
    smooth = ndimage.correlate1d(smooth, g, axis=1, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    return gx, gy


def quantise_direction(gx, gy) -> np.ndarray:
    """Gradient direction bucket: 0 horizontal, 1 down-right diagonal,
    2 vertical, 3 down-left diagonal."""
    ax, ay = np.abs(gx), np.abs(gy)
    d = np.full(gx.shape, 2, dtype=np.int8)
    d[ay <= _TAN_22_5 * ax] = 0
    diag = (ay > _TAN_22_5 * ax) & (ax > _TAN_22_5 * ay)
    d[diag & (gx * gy > 0)] = 1
    d[diag & (gx * gy < 0)] = 3
    return d


def canny(gray: np.ndarray, high: float, low_ratio: float = LOW_RATIO, sigma: float = SIGMA) -> np.ndarray:
    """Boolean edge mask for one pair of hysteresis thresholds."""
    gx, gy = gradients(gray, sigma)
    mag = np.ascontiguousarray(np.hypot(gx, gy))
    thin = kernels.nonmax_suppress(mag, np.ascontiguousarray(quantise_direction(gx, gy)))
    return kernels.hysteresis(np.ascontiguousarray(thin), low_ratio * high, high).astype(bool)


@dataclass
class CannyResult:
    mask: np.ndarray
    lowerings: int
    threshold: float
    found: bool

    @property
    def runs(self) -> int:
        return self.lowerings + 1


def canny_adaptive(gray: np.ndarray, t0: float, min_pixels: int, factor: float = 0.5,
                   max_lowerings: int = 3) -> CannyResult:
    """Run Canny at high threshold ``t0``; while fewer than ``min_pixels``
    edge pixels are found, scale the threshold by ``factor`` and retry, at
    most ``max_lowerings`` times.

    ``found`` is False (and a warning logged) when the last run is still
    short of ``min_pixels``.
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    if not 0 < factor < 1:
        raise ValueError("factor must lie in (0, 1)")
    high = float(t0)
    lowerings = 0
    while True:
        mask = canny(gray, high)
        if mask.sum() >= min_pixels:
            return CannyResult(mask, lowerings, high, True)
        if lowerings == max_lowerings:
            log.warning("no edge found: %d edge pixels after %d lowerings", int(mask.sum()), lowerings)
            return CannyResult(mask, lowerings, high, False)
        high *= factor
        lowerings += 1
