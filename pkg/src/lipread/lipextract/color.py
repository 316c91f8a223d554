"""sRGB (8-bit) to CIELAB under the D65 white point."""

import numpy as np

# IEC 61966-2-1 linear sRGB -> XYZ
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
D65_WHITE = np.array([0.95047, 1.0, 1.08883])

_EPS = 216 / 24389
_KAPPA = 24389 / 27


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def rgb_to_xyz(rgb):
    return srgb_to_linear(rgb) @ _RGB_TO_XYZ.T


def rgb_to_lab(rgb):
    """Convert ``(..., 3)`` uint8 sRGB samples to ``(..., 3)`` float L*a*b*."""
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {rgb.shape}")
    xyz = rgb_to_xyz(rgb) / D65_WHITE
    f = np.where(xyz > _EPS, np.cbrt(xyz), (_KAPPA * xyz + 16) / 116)
    L = 116 * f[..., 1] - 16
    a = 500 * (f[..., 0] - f[..., 1])
    b = 200 * (f[..., 1] - f[..., 2])
    return np.stack([np.clip(L, 0.0, 100.0), a, b], axis=-1)
