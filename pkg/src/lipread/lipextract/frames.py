"""Frame I/O (binary PGM/PPM) and small raster helpers.

A frame is a ``(H, W, 3)`` uint8 array of sRGB samples, or ``(H, W)`` for
grayscale.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import MissingFile

_LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(frame) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim == 2:
        return frame.astype(np.float64)
    if frame.ndim == 3 and frame.shape[2] == 3:
        return frame.astype(np.float64) @ _LUMA
    raise ValueError(f"unsupported frame shape {frame.shape}")


def read_frame(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"frame not found: {path}")
    with Image.open(path) as im:
        if im.mode not in ("RGB", "L"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8).copy()


def write_frame(path, frame) -> None:
    frame = np.asarray(frame, dtype=np.uint8)
    # PIL picks P6 for RGB and P5 for L from the .ppm/.pgm suffix
    Image.fromarray(frame, mode="RGB" if frame.ndim == 3 else "L").save(path)


def crop(frame, roi) -> np.ndarray:
    """``roi`` is ``(x, y, width, height)`` in pixels."""
    x, y, w, h = roi
    H, W = np.asarray(frame).shape[:2]
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > W or y + h > H:
        raise ValueError(f"ROI {tuple(roi)} outside frame of size {W}x{H}")
    return np.asarray(frame)[y:y + h, x:x + w]
