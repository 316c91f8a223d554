"""Fixed-length feature vectors from lip masks or raw ROI pixels."""

from __future__ import annotations

import logging

import numpy as np

from .color import rgb_to_lab
from .frames import to_gray
from .kmeans import kmeans_ab, select_lip_cluster

log = logging.getLogger(__name__)

MASK_GRID = "mask_grid"
RAW_ROI = "raw_roi"
FEATURE_MODES = (MASK_GRID, RAW_ROI)


def _overlap(n_src: int, n_dst: int) -> np.ndarray:
    """(n_dst, n_src) integer overlap lengths between destination cells and
    source pixels, with both axes scaled so every boundary is an integer
    (cells are ``n_src`` long, pixels ``n_dst`` long)."""
    edges = np.arange(n_dst + 1) * n_src
    px = np.arange(n_src + 1) * n_dst
    lo = np.maximum(edges[:-1, None], px[None, :-1])
    hi = np.minimum(edges[1:, None], px[None, 1:])
    return np.clip(hi - lo, 0, None).astype(np.float64)


def area_resample(img: np.ndarray, grid_w: int, grid_h: int) -> np.ndarray:
    """Area-weighted average of ``img`` over a ``grid_h x grid_w`` grid."""
    h, w = img.shape
    # integer weights: a constant image pools to exactly that constant
    Ry = _overlap(h, grid_h)
    Rx = _overlap(w, grid_w)
    return Ry @ img.astype(np.float64) @ Rx.T / (h * w)


def mask_to_feature(mask, grid_w: int = 32, grid_h: int = 16) -> np.ndarray:
    """Crop the mask to its bounding box, pool to ``grid_h x grid_w`` cells
    (each cell holds its covered fraction) and flatten row-major.

    An empty mask gives a zero vector and a warning.
    """
    if grid_w < 1 or grid_h < 1:
        raise ValueError("grid dimensions must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        log.warning("empty lip mask; emitting zero feature")
        return np.zeros(grid_w * grid_h)
    cols = np.flatnonzero(mask.any(axis=0))
    box = mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    return np.clip(area_resample(box, grid_w, grid_h), 0.0, 1.0).ravel()


def roi_feature(roi_pixels) -> np.ndarray:
    """Raw grayscale ROI scaled to [0, 1], flattened row-major."""
    return (to_gray(roi_pixels) / 255.0).ravel()


def lip_mask(roi_pixels, k: int = 3, seed: int = 0) -> np.ndarray:
    return select_lip_cluster(kmeans_ab(rgb_to_lab(roi_pixels), k, seed))


def frame_feature(roi_pixels, mode: str = MASK_GRID, k: int = 3, seed: int = 0,
                  grid_w: int = 32, grid_h: int = 16) -> np.ndarray:
    if mode == MASK_GRID:
        return mask_to_feature(lip_mask(roi_pixels, k, seed), grid_w, grid_h)
    if mode == RAW_ROI:
        return roi_feature(roi_pixels)
    raise ValueError(f"unknown feature mode {mode!r}")
