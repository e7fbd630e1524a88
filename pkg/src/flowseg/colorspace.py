"""sRGB to CIELAB conversion (D65 reference white).

The conversion chain is sRGB -> linear RGB -> XYZ -> LAB. Constants:

* inverse gamma: c <= 0.04045 maps to c/12.92, else ((c+0.055)/1.055)^2.4
* RGB->XYZ matrix: IEC 61966-2-1 sRGB primaries
* D65 white point: (0.95047, 1.0, 1.08883)
* LAB cube root with linear toe below (6/29)^3

L lands in [0, 100]; a and b roughly in [-110, 110].
"""

from __future__ import annotations

import numpy as np

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])
_LAB_DELTA = 6.0 / 29.0


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) array of sRGB values in [0, 1] to CIELAB."""
    rgb = np.asarray(rgb, dtype=np.float64)
    linear = np.where(
        rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4
    )
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    f = np.where(
        t > _LAB_DELTA**3, np.cbrt(t), t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0
    )
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an (..., 3) RGB array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb @ np.array([0.299, 0.587, 0.114])
