"""Order-2 wavelet scattering features over a Morlet filter bank.

Filters are built once per (J, L, size) in the Fourier domain and cached.
The transform cascades wavelet convolution and complex modulus, finishing
each path with a spatial average, which makes the features translation-stable
and parameter-free. Works on plain arrays or tape Vars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from . import imgcore
from .errors import ContractError


@dataclass(frozen=True)
class ScatteringConfig:
    scales: int = 2          # J
    orientations: int = 8    # L
    input_size: int = 50

    def __post_init__(self):
        if self.scales < 1 or self.orientations < 1:
            raise ContractError("scales and orientations must be >= 1")


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: tuple

    def __len__(self):
        return len(self.layout)


def path_layout(cfg: ScatteringConfig) -> tuple:
    """Deterministic channel layout: order-0, order-1 (j,l), order-2 pairs."""
    paths = [("order0",)]
    for j1 in range(cfg.scales):
        for l1 in range(cfg.orientations):
            paths.append(("order1", j1, l1))
    for j1 in range(cfg.scales):
        for j2 in range(j1 + 1, cfg.scales):
            for l1 in range(cfg.orientations):
                for l2 in range(cfg.orientations):
                    paths.append(("order2", j1, l1, j2, l2))
    return tuple(paths)


def _gauss_hat(wx, wy, sigma):
    return np.exp(-sigma ** 2 * (wx ** 2 + wy ** 2) / 2.0)


@lru_cache(maxsize=8)
def filter_bank(cfg: ScatteringConfig):
    """Fourier-domain Morlet band-pass filters plus the terminal low-pass.

    Band-pass filters are zero-mean by construction and jointly normalized so
    the Littlewood-Paley sum stays below 1 (non-expansive frame).
    """
    n = cfg.input_size
    w = 2.0 * np.pi * np.fft.fftfreq(n)
    wx, wy = np.meshgrid(w, w, indexing="xy")
    psis = {}
    for j in range(cfg.scales):
        sigma = 0.8 * 2 ** j
        xi = 3.0 * np.pi / (4.0 * 2 ** j)
        for l in range(cfg.orientations):
            theta = np.pi * l / cfg.orientations
            ux, uy = np.cos(theta), np.sin(theta)
            main = np.exp(-sigma ** 2 * ((wx - xi * ux) ** 2 + (wy - xi * uy) ** 2) / 2.0)
            kappa = np.exp(-sigma ** 2 * xi ** 2 / 2.0)
            psis[(j, l)] = main - kappa * _gauss_hat(wx, wy, sigma)
    lp = np.zeros((n, n))
    for h in psis.values():
        lp += h ** 2
    scale = 1.0 / np.sqrt(lp.max())
    psis = {k: h * scale for k, h in psis.items()}
    phi = _gauss_hat(wx, wy, 0.8 * 2 ** cfg.scales)
    return psis, phi


def _bandpass_modulus(spec_re, spec_im, psi_hat):
    re, im = ad.ifft2(ad.mul(spec_re, psi_hat), ad.mul(spec_im, psi_hat))
    return ad.complex_modulus(re, im)


def scatter(x, cfg: ScatteringConfig = ScatteringConfig()) -> FeatureVector:
    """Scattering feature vector of a single-channel input of the configured size."""
    xv = ad.value_of(x)
    n = cfg.input_size
    if xv.shape != (n, n):
        raise ContractError(f"scatter expects a {n}x{n} image, got {xv.shape}")
    psis, phi = filter_bank(cfg)
    coeffs = []
    spec_re, spec_im = ad.fft2(x)
    low_re, _ = ad.ifft2(ad.mul(spec_re, phi), ad.mul(spec_im, phi))
    coeffs.append(ad.vmean(low_re))
    order1 = {}
    for j1 in range(cfg.scales):
        for l1 in range(cfg.orientations):
            u1 = _bandpass_modulus(spec_re, spec_im, psis[(j1, l1)])
            order1[(j1, l1)] = u1
            coeffs.append(ad.vmean(u1))
    for j1 in range(cfg.scales):
        for j2 in range(j1 + 1, cfg.scales):
            for l1 in range(cfg.orientations):
                u1_re, u1_im = ad.fft2(order1[(j1, l1)])
                for l2 in range(cfg.orientations):
                    u2 = _bandpass_modulus(u1_re, u1_im, psis[(j2, l2)])
                    coeffs.append(ad.vmean(u2))
    return FeatureVector(ad.stack(coeffs), path_layout(cfg))


def prepare_input(x, cfg: ScatteringConfig = ScatteringConfig()):
    """Center square crop, bilinear resize to the configured size, luminance."""
    lum = ad.to_luminance(x)
    h, w = ad.value_of(lum).shape
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    lum = ad.crop(lum, top, left, side, side)
    return ad.resize_bilinear(lum, cfg.input_size, cfg.input_size)


def scatter_image(x, cfg: ScatteringConfig = ScatteringConfig()) -> FeatureVector:
    """Scattering features of an arbitrary-size image after input preparation."""
    return scatter(prepare_input(x, cfg), cfg)


def _check_layouts(a: FeatureVector, b: FeatureVector):
    if a.layout != b.layout:
        raise ContractError("feature vectors come from different configurations")


def adversarial_loss(f_adv: FeatureVector, f_clean: FeatureVector):
    """Negative l2 distance between feature vectors; <= 0."""
    _check_layouts(f_adv, f_clean)
    return ad.neg(ad.l2_norm(ad.sub(f_adv.values, f_clean.values)))


def feature_distance(a: FeatureVector, b: FeatureVector) -> float:
    _check_layouts(a, b)
    return float(np.sqrt(np.sum((ad.value_of(a.values) - ad.value_of(b.values)) ** 2)))


def features_to_csv_rows(f: FeatureVector):
    vals = ad.value_of(f.values)
    return [("/".join(str(p) for p in path), float(v))
            for path, v in zip(f.layout, vals)]
