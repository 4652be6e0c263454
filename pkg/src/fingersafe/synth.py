"""Synthetic fingerprint generation with ground-truth orientation fields.

Each identity owns a smooth random orientation field (low-order trigonometric
polynomial in doubled-angle space plus one or two singular points) and a seeded
noise texture; oriented Gabor filtering of the noise at the ridge period grows
a ridge pattern that follows the field. Impressions of an identity are rigid
jitters of the canonical pattern with fresh intensity noise. Everything is
deterministic down to (master seed, identity, impression).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractError

SKIN_RGB = np.array([0.93, 0.74, 0.62])
N_ORIENT_BINS = 16
GABOR_ITERATIONS = 3


@dataclass(frozen=True)
class SynthConfig:
    identities: int = 20
    impressions: int = 4
    size: int = 160
    ridge_period: float = 8.0
    noise_amplitude: float = 0.03
    max_rotation_deg: float = 6.0
    max_shift: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.identities < 1 or self.impressions < 1:
            raise ContractError("identities and impressions must be >= 1")
        if self.ridge_period < 4:
            raise ContractError("ridge period must be >= 4 px")


def _rng_for(cfg: SynthConfig, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=key))


def _doubled_angle_field(cfg: SynthConfig, identity: int):
    """Smooth (u, v) = (cos 2theta, sin 2theta) field with 1-2 singular points."""
    rng = _rng_for(cfg, 0, identity)
    n = cfg.size
    yy, xx = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    u = np.zeros((n, n))
    v = np.zeros((n, n))
    for _ in range(3):
        fy, fx = rng.uniform(-1.2, 1.2, size=2)
        pu, pv = rng.uniform(0, 2 * np.pi, size=2)
        amp = rng.uniform(0.4, 1.0)
        u += amp * np.cos(np.pi * (fx * xx + fy * yy) + pu)
        v += amp * np.cos(np.pi * (fx * xx + fy * yy) + pv)
    scale = 0.45
    u, v = u * scale, v * scale
    for _ in range(int(rng.integers(1, 3))):
        cy, cx = rng.uniform(-0.5, 0.5, size=2)
        dy, dx = yy - cy, xx - cx
        r = np.hypot(dx, dy) + 1e-6
        u += dx / r
        v += dy / r
    return u, v


def _oriented_gabor_bank(size: int, period: float):
    """FFT spectra of Gabor kernels for the quantized ridge orientations."""
    half = int(round(period * 1.25))
    ax = np.arange(-half, half + 1, dtype=float)
    yk, xk = np.meshgrid(ax, ax, indexing="ij")
    sigma = period * 0.5
    spectra = []
    for q in range(N_ORIENT_BINS):
        theta = np.pi * q / N_ORIENT_BINS  # ridge direction
        wave = theta + np.pi / 2           # carrier runs across the ridges
        rot = xk * np.cos(wave) + yk * np.sin(wave)
        kern = np.exp(-(xk ** 2 + yk ** 2) / (2 * sigma ** 2)) * np.cos(2 * np.pi * rot / period)
        kern -= kern.mean()
        pad = np.zeros((size, size))
        k = kern.shape[0]
        pad[:k, :k] = kern
        pad = np.roll(pad, (-half, -half), axis=(0, 1))
        spectra.append(np.fft.fft2(pad))
    return spectra


def _render_pattern(cfg: SynthConfig, identity: int, theta: np.ndarray) -> np.ndarray:
    """Gabor-filter identity noise along the orientation field; values in [-1, 1]."""
    rng = _rng_for(cfg, 1, identity)
    n = cfg.size
    img = rng.standard_normal((n, n))
    spectra = _oriented_gabor_bank(n, cfg.ridge_period)
    # soft assignment of each pixel to its two nearest orientation bins,
    # measured in doubled-angle space
    bin_pos = theta * N_ORIENT_BINS / np.pi
    lo = np.floor(bin_pos).astype(int)
    t = bin_pos - lo
    lo_idx = np.mod(lo, N_ORIENT_BINS)
    hi_idx = np.mod(lo + 1, N_ORIENT_BINS)
    for _ in range(GABOR_ITERATIONS):
        spec = np.fft.fft2(img)
        responses = [np.real(np.fft.ifft2(spec * s)) for s in spectra]
        stackr = np.stack(responses)
        flat_lo = np.take_along_axis(stackr, lo_idx[None], axis=0)[0]
        flat_hi = np.take_along_axis(stackr, hi_idx[None], axis=0)[0]
        img = (1 - t) * flat_lo + t * flat_hi
        img = np.tanh(3.0 * img / (np.abs(img).std() + 1e-9))
    return img


def _canonical(cfg: SynthConfig, identity: int):
    u, v = _doubled_angle_field(cfg, identity)
    theta = np.mod(0.5 * np.arctan2(v, u), np.pi)
    pattern = _render_pattern(cfg, identity, theta)
    return pattern, u, v


def synth_fingerprint(cfg: SynthConfig, identity: int, impression: int):
    """One impression: (RGB image in [0,1], ground-truth orientation field)."""
    if not (0 <= identity < cfg.identities and 0 <= impression < cfg.impressions):
        raise ContractError("identity/impression outside the configured counts")
    pattern, u, v = _canonical(cfg, identity)
    rng = _rng_for(cfg, 2, identity, impression)
    angle = np.deg2rad(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg))
    shift = rng.uniform(-cfg.max_shift, cfg.max_shift, size=2)

    n = cfg.size
    center = (n - 1) / 2.0
    ca, sa = np.cos(angle), np.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])  # inverse map for output->input
    offset = np.array([center, center]) - rot @ (np.array([center, center]) + shift)
    warp = lambda img, cval: ndimage.affine_transform(
        img, rot, offset=offset, order=1, mode="constant", cval=cval)
    pattern_w = warp(pattern, 0.0)
    u_w, v_w = warp(u, 1.0), warp(v, 0.0)
    # rotating the frame by `angle` adds `angle` to every orientation
    theta = np.mod(0.5 * np.arctan2(v_w, u_w) + angle, np.pi)

    ridge = 0.5 * (pattern_w + 1.0)  # 1 = ridge, 0 = valley
    gray = 1.0 - 0.45 * ridge
    img = gray[:, :, None] * SKIN_RGB[None, None, :]
    img = img + rng.normal(0.0, cfg.noise_amplitude, size=img.shape)
    return np.clip(img, 0.0, 1.0), theta


def write_dataset(cfg: SynthConfig, root) -> list:
    """Materialize the dataset tree <root>/<identity>/<impression>.png.

    Ground-truth orientation fields are stored next to each image as
    <impression>_orientation.npy. Returns (identity, impression, path) rows.
    """
    import os

    from . import imgcore

    rows = []
    for ident in range(cfg.identities):
        d = os.path.join(str(root), f"{ident:03d}")
        os.makedirs(d, exist_ok=True)
        for imp in range(cfg.impressions):
            img, theta = synth_fingerprint(cfg, ident, imp)
            path = os.path.join(d, f"{imp}.png")
            imgcore.save_png(path, img)
            np.save(os.path.join(d, f"{imp}_orientation.npy"), theta)
            rows.append((ident, imp, path))
    return rows
