"""Dense image primitives: convolution, kernels, FFT, resize, color, codecs.

Images are plain float64 numpy arrays, shape (H, W) for grayscale or
(H, W, 3) for RGB, nominal range [0, 1]. 8-bit quantization happens only at
the PNG/JPEG boundary.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage
from scipy.signal import fftconvolve

from .errors import ConfigurationError, ShapeError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _check_kernel(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ConfigurationError(f"kernel must be 2-D with odd sides, got {k.shape}")
    return k


def pad2d(x: np.ndarray, ry: int, rx: int, padding: str) -> np.ndarray:
    if padding == "replicate":
        return np.pad(x, ((ry, ry), (rx, rx)), mode="edge")
    if padding == "zero":
        return np.pad(x, ((ry, ry), (rx, rx)), mode="constant")
    raise ConfigurationError(f"unknown padding mode {padding!r}")


def conv2d(x: np.ndarray, k: np.ndarray, padding: str = "replicate") -> np.ndarray:
    """True 2-D convolution (kernel flipped), output same size as input."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"conv2d expects a single-channel image, got shape {x.shape}")
    k = _check_kernel(k)
    ry, rx = k.shape[0] // 2, k.shape[1] // 2
    xp = pad2d(x, ry, rx, padding)
    return fftconvolve(xp, k, mode="valid")


def conv2d_adjoint(g: np.ndarray, k: np.ndarray, padding: str = "replicate") -> np.ndarray:
    """Adjoint of conv2d in x for fixed k: maps output-shaped g back to input shape."""
    k = _check_kernel(k)
    ry, rx = k.shape[0] // 2, k.shape[1] // 2
    h, w = g.shape
    # adjoint of the valid convolution on the padded image
    gp = fftconvolve(g, k[::-1, ::-1], mode="full")
    out = gp[ry:ry + h, rx:rx + w].copy()
    if padding == "replicate":
        # fold pad rows/cols back onto the edge pixels they replicated
        out[0, :] += gp[:ry, rx:rx + w].sum(axis=0)
        out[-1, :] += gp[ry + h:, rx:rx + w].sum(axis=0)
        out[:, 0] += gp[ry:ry + h, :rx].sum(axis=1)
        out[:, -1] += gp[ry:ry + h, rx + w:].sum(axis=1)
        out[0, 0] += gp[:ry, :rx].sum()
        out[0, -1] += gp[:ry, rx + w:].sum()
        out[-1, 0] += gp[ry + h:, :rx].sum()
        out[-1, -1] += gp[ry + h:, rx + w:].sum()
    return out


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Unit-sum isotropic Gaussian, size x size, size odd."""
    if size % 2 == 0 or size < 1:
        raise ConfigurationError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=float)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def gaussian_derivative_kernels(size: int, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """(Gx, Gy): derivatives of a Gaussian along columns (x) and rows (y).

    Gx responds to horizontal intensity change so that convolving a ramp
    image v(i, j) = j yields a positive constant in the interior.
    """
    if size % 2 == 0 or size < 1:
        raise ConfigurationError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    r = size // 2
    ax = np.arange(-r, r + 1, dtype=float)
    g1 = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    g1 = g1 / g1.sum()
    # d/db of the 1-D Gaussian; under true convolution this acts as +d/dx
    d = -(ax / sigma ** 2) * g1
    gx = np.outer(g1, d)
    gy = gx.T.copy()
    return gx, gy


def fft2(x: np.ndarray) -> np.ndarray:
    return np.fft.fft2(np.asarray(x))


def ifft2(spectrum: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(np.asarray(spectrum))


def to_luminance(x: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma; single-channel input passes through."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x
    if x.ndim == 3 and x.shape[2] == 3:
        return x @ LUMA_WEIGHTS
    raise ShapeError(f"expected (H,W) or (H,W,3), got {x.shape}")


def resize_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic bilinear interpolation matrix (half-pixel centers)."""
    if n_out < 1:
        raise ConfigurationError(f"target size must be >= 1, got {n_out}")
    w = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        t = src - lo
        w[i, lo] += 1.0 - t
        w[i, hi] += t
    return w


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    wr = resize_weights(x.shape[0], out_h)
    wc = resize_weights(x.shape[1], out_w)
    if x.ndim == 2:
        return wr @ x @ wc.T
    return np.einsum("ij,jkc,lk->ilc", wr, x, wc)


def clamp01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


# --- codecs ---------------------------------------------------------------

def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)


def _from_uint8(a: np.ndarray) -> np.ndarray:
    return a.astype(float) / 255.0


def save_png(path, x: np.ndarray) -> None:
    a = _to_uint8(x)
    mode = "L" if a.ndim == 2 else "RGB"
    PILImage.fromarray(a, mode=mode).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    img = PILImage.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return _from_uint8(np.asarray(img))


def save_noise_png(path, noise: np.ndarray) -> None:
    """Signed noise rendered as PNG via n -> clamp(0.5 + 8n, 0, 1)."""
    save_png(path, np.clip(0.5 + noise * 8.0, 0.0, 1.0))


def jpeg_roundtrip(x: np.ndarray, quality: int) -> np.ndarray:
    """Baseline-JPEG encode/decode at the given quality, back to [0,1] floats."""
    quality = int(quality)
    if not 1 <= quality <= 100:
        raise ConfigurationError(f"JPEG quality must be in [1, 100], got {quality}")
    a = _to_uint8(x)
    mode = "L" if a.ndim == 2 else "RGB"
    buf = io.BytesIO()
    PILImage.fromarray(a, mode=mode).save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    out = _from_uint8(np.asarray(PILImage.open(buf)))
    if x.ndim == 2 and out.ndim == 3:
        out = out[:, :, 0]
    return out


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
    if mse == 0:
        return float("inf")
    return -10.0 * np.log10(mse)
