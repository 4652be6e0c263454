"""Ridge orientation field estimation and the orientation distortion loss.

The orientation at a pixel is the dominant ridge direction in [0, pi),
recovered from smoothed products of Gaussian-derivative responses via the
doubled-angle arctangent. All functions accept plain arrays or tape Vars.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import imgcore
from .errors import ShapeError

SMOOTH_SIZE = 31
SMOOTH_SIGMA = 5.0  # (31 - 1) / 6
DERIV_SIZE = 7
DERIV_SIGMA = 1.0

_SMOOTH = imgcore.gaussian_kernel(SMOOTH_SIZE, SMOOTH_SIGMA)
_GX, _GY = imgcore.gaussian_derivative_kernels(DERIV_SIZE, DERIV_SIGMA)


def estimate_orientation(x):
    """Per-pixel ridge angle in [0, pi) from a single-channel image.

    Half the full-quadrant arctangent of the smoothed doubled-angle gradient
    moments, shifted by pi/2 so the angle follows the ridge, not the gradient.
    Flat regions land on atan2(0, 0) = 0, i.e. pi/2 after the shift.
    """
    xv = ad.value_of(x)
    if xv.ndim != 2:
        raise ShapeError(f"orientation expects a single-channel image, got {xv.shape}")
    gx = ad.conv2d(x, _GX)
    gy = ad.conv2d(x, _GY)
    num = ad.conv2d(ad.mul(2.0, ad.mul(gx, gy)), _SMOOTH)
    den = ad.conv2d(ad.sub(ad.square(gx), ad.square(gy)), _SMOOTH)
    # flat regions: snap float-level responses to 0 so atan2(0, 0) = 0 applies
    num = ad.deadzone(num, 1e-12)
    den = ad.deadzone(den, 1e-12)
    phi = ad.add(ad.mul(0.5, ad.atan2(num, den)), np.pi / 2)
    return ad.mod_pi(phi)


def orientation_distortion_loss(phi_adv, phi):
    """Negative mean |sin| of the raw angular difference; value in [-1, 0]."""
    a, b = ad.value_of(phi_adv), ad.value_of(phi)
    if a.shape != b.shape:
        raise ShapeError(f"orientation fields differ in shape: {a.shape} vs {b.shape}")
    diff = ad.absolute(ad.sub(phi_adv, phi))
    return ad.neg(ad.vmean(ad.absolute(ad.sin(diff))))


def orientation_to_rgb(phi: np.ndarray) -> np.ndarray:
    """Visualization: hue = doubled angle, full saturation and value."""
    from matplotlib.colors import hsv_to_rgb

    hue = np.mod(2.0 * np.asarray(phi), 2.0 * np.pi) / (2.0 * np.pi)
    hsv = np.stack([hue, np.ones_like(hue), np.ones_like(hue)], axis=-1)
    return hsv_to_rgb(hsv)
