"""Non-learning recognition stack: ridge enhancement, minutiae, matching.

Frangi-style Hessian vesselness enhances ridges, adaptive thresholding and
morphological thinning produce a 1-px skeleton, crossing numbers classify
minutiae, and an alignment search over reference pairs scores two minutiae
sets. Also houses the photo-to-fingertip segmentation recipe.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.morphology import thin as _skel_thin

from .errors import ConfigurationError, ContractError, SegmentationFailure

FRANGI_BETA = 0.5
DEFAULT_SCALES = (1.0, 1.5, 2.0)
BORDER_MARGIN = 8
MIN_MINUTIA_SPACING = 4.0
MATCH_DIST_TOL = 12.0
MATCH_ANGLE_TOL = math.radians(20.0)
KNUCKLE_FRACTION = 0.55
MAX_REFERENCE_PAIRS = 150


@dataclass(frozen=True)
class Minutia:
    x: float
    y: float
    angle: float  # radians in [0, 2*pi)
    kind: str     # "ending" | "bifurcation"


@dataclass
class MinutiaeSet:
    minutiae: list
    shape: tuple

    def __len__(self):
        return len(self.minutiae)


@dataclass
class SegmentationMask:
    mask: np.ndarray          # full-frame booleans, single connected component
    box: tuple                # (top, left, height, width) of the fingertip crop

    @property
    def cropped(self) -> np.ndarray:
        t, l, h, w = self.box
        return self.mask[t:t + h, l:l + w]


# --- ridge enhancement ------------------------------------------------------

def frangi_enhance(x: np.ndarray, scales=DEFAULT_SCALES) -> np.ndarray:
    """Multi-scale Hessian ridge likelihood in [0, 1], dark-ridge polarity."""
    scales = tuple(scales)
    if not scales:
        raise ConfigurationError("frangi_enhance needs at least one scale")
    x = np.asarray(x, dtype=float)
    best = np.zeros_like(x)
    for sigma in scales:
        hxx = ndimage.gaussian_filter(x, sigma, order=(0, 2)) * sigma ** 2
        hyy = ndimage.gaussian_filter(x, sigma, order=(2, 0)) * sigma ** 2
        hxy = ndimage.gaussian_filter(x, sigma, order=(1, 1)) * sigma ** 2
        # eigenvalues of [[hxx, hxy], [hxy, hyy]]
        tr = 0.5 * (hxx + hyy)
        disc = np.sqrt(np.maximum(0.25 * (hxx - hyy) ** 2 + hxy ** 2, 0.0))
        e1, e2 = tr - disc, tr + disc
        swap = np.abs(e1) > np.abs(e2)
        lam1 = np.where(swap, e2, e1)  # |lam1| <= |lam2|
        lam2 = np.where(swap, e1, e2)
        s2 = lam1 ** 2 + lam2 ** 2
        c = 0.5 * np.sqrt(s2.max()) if s2.max() > 0 else 1.0
        rb2 = (lam1 / np.where(lam2 == 0, 1.0, lam2)) ** 2
        v = np.exp(-rb2 / (2 * FRANGI_BETA ** 2)) * (1 - np.exp(-s2 / (2 * c ** 2)))
        v = np.where(lam2 > 0, v, 0.0)  # dark ridges on light background
        best = np.maximum(best, v)
    lo, hi = best.min(), best.max()
    if hi > lo:
        best = (best - lo) / (hi - lo)
    return best


def binarize_and_thin(ridge: np.ndarray, window: int = 15, offset: float = 0.0) -> np.ndarray:
    """Adaptive mean threshold then iterative thinning; {0,1} skeleton, idempotent."""
    ridge = np.asarray(ridge, dtype=float)
    local_mean = ndimage.uniform_filter(ridge, size=window, mode="nearest")
    binary = ridge > (local_mean + offset)
    return _skel_thin(binary).astype(np.uint8)


# --- crossing-number minutiae -----------------------------------------------

_NEIGHBOR_CYCLE = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


def crossing_number(neighbors) -> int:
    """Half the number of 0/1 transitions around the 8-neighborhood cycle."""
    v = [1 if n else 0 for n in neighbors]
    return sum(abs(v[(k + 1) % 8] - v[k]) for k in range(8)) // 2


def _branch_directions(skel, y, x, steps=5):
    """Unit direction of each ridge branch leaving (y, x)."""
    h, w = skel.shape
    dirs = []
    starts = [(y + dy, x + dx) for dy, dx in _NEIGHBOR_CYCLE
              if 0 <= y + dy < h and 0 <= x + dx < w and skel[y + dy, x + dx]]
    for sy, sx in starts:
        visited = {(y, x), (sy, sx)}
        cy, cx = sy, sx
        for _ in range(steps - 1):
            nxt = [(cy + dy, cx + dx) for dy, dx in _NEIGHBOR_CYCLE
                   if 0 <= cy + dy < h and 0 <= cx + dx < w
                   and skel[cy + dy, cx + dx] and (cy + dy, cx + dx) not in visited]
            if len(nxt) != 1:
                break
            cy, cx = nxt[0]
            visited.add((cy, cx))
        norm = math.hypot(cx - x, cy - y)
        if norm > 0:
            dirs.append(((cx - x) / norm, (cy - y) / norm))
    return dirs


def extract_minutiae(skeleton: np.ndarray, mask: SegmentationMask | None = None) -> MinutiaeSet:
    """Crossing-number minutiae with border and spurious-pair filtering."""
    skel = np.asarray(skeleton) > 0
    h, w = skel.shape
    region = mask.mask if mask is not None else np.ones((h, w), dtype=bool)
    depth = ndimage.distance_transform_edt(region)
    found = []
    ys, xs = np.nonzero(skel)
    for y, x in zip(ys.tolist(), xs.tolist()):
        if depth[y, x] < BORDER_MARGIN:
            continue
        neigh = [skel[y + dy, x + dx] if 0 <= y + dy < h and 0 <= x + dx < w else 0
                 for dy, dx in _NEIGHBOR_CYCLE]
        cn = crossing_number(neigh)
        if cn not in (1, 3):
            continue
        dirs = _branch_directions(skel, y, x)
        if not dirs:
            continue
        sx = sum(d[0] for d in dirs)
        sy = sum(d[1] for d in dirs)
        angle = math.atan2(sy, sx) % (2 * math.pi)
        found.append(Minutia(float(x), float(y), angle,
                             "ending" if cn == 1 else "bifurcation"))
    # spurious pairs closer than the spacing floor are removed outright
    drop = set()
    for i in range(len(found)):
        for j in range(i + 1, len(found)):
            if math.hypot(found[i].x - found[j].x, found[i].y - found[j].y) < MIN_MINUTIA_SPACING:
                drop.add(i)
                drop.add(j)
    kept = [m for i, m in enumerate(found) if i not in drop]
    return MinutiaeSet(kept, (h, w))


# --- matching ----------------------------------------------------------------

def _angle_diff(a, b):
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def _directed_score(a: MinutiaeSet, b: MinutiaeSet) -> float:
    pa = np.array([[m.x, m.y] for m in a.minutiae])
    pb = np.array([[m.x, m.y] for m in b.minutiae])
    ta = np.array([m.angle for m in a.minutiae])
    tb = np.array([m.angle for m in b.minutiae])
    ka = [m.kind for m in a.minutiae]
    kb = [m.kind for m in b.minutiae]
    same_kind = np.array([[x == y for y in kb] for x in ka])
    refs = [(i, j) for i in range(len(a)) for j in range(len(b)) if ka[i] == kb[j]]
    if len(refs) > MAX_REFERENCE_PAIRS:
        stride = len(refs) / MAX_REFERENCE_PAIRS
        refs = [refs[int(k * stride)] for k in range(MAX_REFERENCE_PAIRS)]
    best = 0
    for i, j in refs:
        rot = tb[j] - ta[i]
        cr, sr = math.cos(rot), math.sin(rot)
        rel = pa - pa[i]
        moved = np.stack([rel[:, 0] * cr - rel[:, 1] * sr,
                          rel[:, 0] * sr + rel[:, 1] * cr], axis=1) + pb[j]
        dist = np.sqrt(((moved[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
        dang = np.abs(((ta[:, None] + rot) - tb[None, :] + math.pi) % (2 * math.pi) - math.pi)
        ok = (dist <= MATCH_DIST_TOL) & (dang <= MATCH_ANGLE_TOL) & same_kind
        # greedy one-to-one assignment by increasing distance
        cand = np.argwhere(ok)
        order = np.argsort(dist[ok], kind="stable")
        used_a, used_b, count = set(), set(), 0
        for idx in order:
            ia, ib = cand[idx]
            if ia in used_a or ib in used_b:
                continue
            used_a.add(ia)
            used_b.add(ib)
            count += 1
        best = max(best, count)
    return 2.0 * best / (len(a) + len(b))


def match_minutiae(a: MinutiaeSet, b: MinutiaeSet) -> float:
    """Alignment-search match score in [0, 1]; empty sets score 0."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    return max(_directed_score(a, b), _directed_score(b, a))


def minutiae_to_csv(path, mset: MinutiaeSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "angle_deg", "kind"])
        for m in mset.minutiae:
            writer.writerow([m.x, m.y, math.degrees(m.angle), m.kind])


def extract_from_image(x: np.ndarray, scales=DEFAULT_SCALES,
                       mask: SegmentationMask | None = None) -> MinutiaeSet:
    """Full classical pipeline: enhance, binarize, thin, extract."""
    from . import imgcore

    lum = imgcore.to_luminance(np.asarray(x, dtype=float))
    ridge = frangi_enhance(lum, scales)
    skel = binarize_and_thin(ridge)
    return extract_minutiae(skel, mask)


# --- fingertip segmentation ---------------------------------------------------

def _skin_mask(photo: np.ndarray) -> np.ndarray:
    r, g, b = photo[:, :, 0], photo[:, :, 1], photo[:, :, 2]
    total = r + g + b + 1e-8
    rn, gn = r / total, g / total
    return (rn > 0.33) & (gn > 0.18) & (gn < 0.42) & (r > 0.2) & (r >= g) & (g >= 0.8 * b)


def segment_fingertip(photo: np.ndarray):
    """Skin-threshold segmentation plus a first-knuckle crop heuristic.

    Returns (SegmentationMask, cropped RGB image). The crop keeps the top
    55% of the finger's bounding box (finger assumed pointing up).
    """
    photo = np.asarray(photo, dtype=float)
    if photo.ndim != 3 or photo.shape[2] != 3:
        raise ContractError(f"segmentation expects an RGB photo, got {photo.shape}")
    h, w = photo.shape[:2]
    skin = _skin_mask(photo)
    skin = ndimage.binary_erosion(skin, iterations=2)
    skin = ndimage.binary_dilation(skin, iterations=2)
    labels, n = ndimage.label(skin)
    if n == 0:
        raise SegmentationFailure("no skin-colored region found")
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=range(1, n + 1))
    biggest = int(np.argmax(sizes)) + 1
    comp = labels == biggest
    if comp.sum() < 0.01 * h * w:
        raise SegmentationFailure("skin-colored region below 1% of the frame")
    comp = ndimage.binary_fill_holes(comp)
    ys, xs = np.nonzero(comp)
    top, bottom = ys.min(), ys.max()
    left, right = xs.min(), xs.max()
    crop_h = max(1, int(round((bottom - top + 1) * KNUCKLE_FRACTION)))
    box = (int(top), int(left), crop_h, int(right - left + 1))
    full = np.zeros((h, w), dtype=bool)
    full[top:top + crop_h, left:right + 1] = comp[top:top + crop_h, left:right + 1]
    # keep a single connected component after the knuckle cut
    labels2, n2 = ndimage.label(full)
    if n2 > 1:
        sizes2 = ndimage.sum_labels(np.ones_like(labels2), labels2, index=range(1, n2 + 1))
        full = labels2 == (int(np.argmax(sizes2)) + 1)
    t, l, ch, cw = box
    return SegmentationMask(full, box), photo[t:t + ch, l:l + cw].copy()
