"""Low-level perceptual models: center-surround contrast and spectral saliency.

The contrast map is a light-adapted difference-of-Gaussians (center minus
surround over center plus surround). The saliency map is the spectral
residual of the log-amplitude spectrum, reconstructed with the original
phase and smoothed. Both accept plain arrays or tape Vars.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import imgcore
from .errors import ShapeError

CENTER_RADIUS = 2.0
SURROUND_RADIUS = 4.0
CENTER_SIZE = 13
SURROUND_SIZE = 25
SURROUND_GAIN = 0.85
BOX_SIZE = 3
SALIENCY_SMOOTH_SIZE = 9
SALIENCY_SMOOTH_SIGMA = (SALIENCY_SMOOTH_SIZE - 1) / 6.0
LOG_EPS = 1e-8


def _receptive_kernel(size: int, radius: float) -> np.ndarray:
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=float)
    return np.exp(-((ax[:, None] / radius) ** 2) - ((ax[None, :] / radius) ** 2))


# kernels are deliberately not normalized to unit sum; the ratio form of the
# contrast map cancels the common scale
CENTER_KERNEL = _receptive_kernel(CENTER_SIZE, CENTER_RADIUS)
SURROUND_KERNEL = (SURROUND_GAIN * (CENTER_RADIUS / SURROUND_RADIUS) ** 2
                   * _receptive_kernel(SURROUND_SIZE, SURROUND_RADIUS))
BOX_KERNEL = np.full((BOX_SIZE, BOX_SIZE), 1.0 / BOX_SIZE ** 2)
SALIENCY_SMOOTH = imgcore.gaussian_kernel(SALIENCY_SMOOTH_SIZE, SALIENCY_SMOOTH_SIGMA)


def local_contrast(x):
    """Light-adapted center-surround response, pixelwise in [-1, 1] for x >= 0."""
    xv = ad.value_of(x)
    if xv.ndim != 2:
        raise ShapeError(f"contrast expects a single-channel image, got {xv.shape}")
    c = ad.conv2d(x, CENTER_KERNEL)
    s = ad.conv2d(x, SURROUND_KERNEL)
    return ad.safe_div(ad.sub(c, s), ad.add(c, s))


def spectral_saliency(x):
    """Spectral-residual attention map, nonnegative, unnormalized."""
    xv = ad.value_of(x)
    if xv.ndim != 2:
        raise ShapeError(f"saliency expects a single-channel image, got {xv.shape}")
    re, im = ad.fft2(x)
    amp = ad.complex_modulus(re, im)
    log_amp = ad.log(ad.add(amp, LOG_EPS))
    residual = ad.sub(log_amp, ad.conv2d(log_amp, BOX_KERNEL))
    phase = ad.atan2(im, re)
    mag = ad.exp(residual)
    rec_re, rec_im = ad.ifft2(ad.mul(mag, ad.cos(phase)), ad.mul(mag, ad.sin(phase)))
    power = ad.add(ad.square(rec_re), ad.square(rec_im))
    return ad.conv2d(power, SALIENCY_SMOOTH)


def contrast_suppression_loss(omega_adv, omega, psi_adv):
    """Mean rectified saliency-weighted contrast increase; >= 0.

    The attention weight enters detached: it is recomputed per iteration but
    treated as a constant when gradients are taken.
    """
    a, b = ad.value_of(omega_adv), ad.value_of(omega)
    w = ad.value_of(psi_adv)
    if a.shape != b.shape or a.shape != w.shape:
        raise ShapeError(
            f"contrast/saliency shapes differ: {a.shape}, {b.shape}, {w.shape}")
    weighted = ad.mul(ad.sub(omega_adv, omega), ad.detach(psi_adv))
    return ad.vmean(ad.relu(weighted))
