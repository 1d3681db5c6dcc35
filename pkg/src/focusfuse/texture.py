"""Focus-aware fusion of texture layers.

The salient feature map of a texture layer is the product of a multi-scale
significance map (local spatial frequency over Gaussian and Laplacian
pyramid levels) and the norm of a nonlinear gradient operator.  It drives
both the binary focus decision between the two visible textures and the
soft weights between the focused visible texture and the infrared texture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgcore import BinaryMask, GrayImage, as_gray, check_same_shape, downsample2, upsample2

GRAD_P = 0.8
BASE_FLOOR = 1e-6
WEIGHT_EPS = 1e-12
CV_MAX_PASSES = 32


@dataclass
class PyramidStack:
    gaussian: list
    laplacian: list

    @property
    def levels_n(self) -> int:
        return len(self.laplacian)

    def collapse(self) -> GrayImage:
        g = self.gaussian[-1]
        for lap in reversed(self.laplacian):
            h, w = lap.shape
            g = lap + upsample2(g, w, h)
        return g


@dataclass
class SaliencyMaps:
    gm_x: GrayImage
    gm_y: GrayImage
    sm: GrayImage
    tm: GrayImage


@dataclass
class DecisionMaps:
    map_raw: BinaryMask
    map_verified: BinaryMask


def grad_maps(t, p: float = GRAD_P) -> tuple[GrayImage, GrayImage]:
    """Nonlinear gradient operator ``r*d - (2d + 0.01)**p`` on each axis.

    ``d`` is the forward difference; the power base is floored at 1e-6 so
    steep negative differences stay real-valued.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    t = as_gray(t, "texture")
    r = p * math.exp(p / 2.0 - 1.0)
    out = []
    for axis in (1, 0):
        d = np.zeros_like(t)
        if axis == 1:
            d[:, :-1] = t[:, 1:] - t[:, :-1]
        else:
            d[:-1, :] = t[1:, :] - t[:-1, :]
        base = np.maximum(2.0 * d + 0.01, BASE_FLOOR)
        out.append(r * d - base**p)
    return out[0], out[1]


def build_pyramid(t, levels_n: int = 3) -> PyramidStack:
    t = as_gray(t, "texture")
    if levels_n < 1:
        raise ValueError(f"levels_n must be >= 1, got {levels_n}")
    if min(t.shape) / 2**levels_n < 4:
        raise ValueError(
            f"image {t.shape[1]}x{t.shape[0]} too small for {levels_n} pyramid levels "
            f"(need min side >= {4 * 2**levels_n})"
        )
    gaussian = [t]
    for _ in range(levels_n):
        gaussian.append(downsample2(gaussian[-1]))
    laplacian = []
    for fine, coarse in zip(gaussian[:-1], gaussian[1:]):
        h, w = fine.shape
        laplacian.append(fine - upsample2(coarse, w, h))
    return PyramidStack(gaussian, laplacian)


def local_spatial_frequency(img, window: int = 7) -> GrayImage:
    """Per-pixel spatial frequency over a ``window`` x ``window`` neighbourhood."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    img = as_gray(img)
    dh = np.zeros_like(img)
    dh[:, 1:] = img[:, 1:] - img[:, :-1]
    dv = np.zeros_like(img)
    dv[1:, :] = img[1:, :] - img[:-1, :]
    rf2 = ndimage.uniform_filter(dh * dh, size=window, mode="reflect")
    cf2 = ndimage.uniform_filter(dv * dv, size=window, mode="reflect")
    # box filtering can leave -1e-18 residue on flat regions
    return np.sqrt(np.maximum(rf2 + cf2, 0.0))


def significance_map(pyr: PyramidStack, window: int = 7) -> GrayImage:
    """Accumulate ``sqrt(SF(G_k) + SF(L_k))`` from level N-1 down to 1.

    The running sum is upsampled one level at a time and finally brought
    back to source resolution.  With a single-level pyramid the sum is empty
    and the map is neutral (all ones), so the feature map reduces to the
    gradient term.
    """
    n = pyr.levels_n
    src = pyr.gaussian[0]
    if n < 2:
        return np.ones_like(src)
    acc = None
    for k in range(n - 1, 0, -1):
        g, lap = pyr.gaussian[k], pyr.laplacian[k]
        term = np.sqrt(local_spatial_frequency(g, window) + local_spatial_frequency(lap, window))
        if acc is not None:
            h, w = g.shape
            term = term + upsample2(acc, w, h)
        acc = term
    h, w = src.shape
    return np.maximum(upsample2(acc, w, h), 0.0)


def salient_feature_map(t, levels_n: int = 3, window: int = 7, p: float = GRAD_P) -> SaliencyMaps:
    t = as_gray(t, "texture")
    gm_x, gm_y = grad_maps(t, p)
    sm = significance_map(build_pyramid(t, levels_n), window)
    tm = sm * np.sqrt(gm_x * gm_x + gm_y * gm_y)
    return SaliencyMaps(gm_x, gm_y, sm, tm)


def focus_decision(tm1, tm2) -> BinaryMask:
    """1 where the first map is strictly larger; ties go to the second image."""
    check_same_shape(tm1, tm2, names=["tm1", "tm2"])
    return np.asarray(tm1) > np.asarray(tm2)


def _remove_small_regions(mask: np.ndarray, min_area: float) -> np.ndarray:
    out = mask.copy()
    structure = np.ones((3, 3), dtype=bool)
    for polarity in (True, False):
        labels, count = ndimage.label(out == polarity, structure=structure)
        if count == 0:
            continue
        sizes = np.bincount(labels.ravel())
        small = sizes < min_area
        small[0] = False
        out[small[labels]] = not polarity
    return out


def _majority(mask: np.ndarray, size: int) -> np.ndarray:
    """Flip pixels that fewer than a third of their window agrees with.

    The hysteresis band keeps pixels on a straight boundary (about half the
    window on each side) stable, so edges do not creep between passes.
    """
    votes = ndimage.convolve(mask.astype(np.int32), np.ones((size, size), dtype=np.int32), mode="reflect")
    agree = np.where(mask, votes, size * size - votes)
    return np.where(3 * agree < size * size, ~mask, mask)


def consistency_verify(map_raw, levels: int = 3, area_frac: float = 0.01) -> BinaryMask:
    """Small-region removal followed by vote filters of width 2**l + 1.

    The pass is repeated until the map stops changing (at most
    ``CV_MAX_PASSES`` times), so a verified map is a fixed point: mirrored
    borders can otherwise erode a corner a little further on each pass.
    """
    mask = np.asarray(map_raw)
    if mask.ndim != 2:
        raise ValueError("decision map must be 2-D")
    mask = mask.astype(bool)
    for _ in range(CV_MAX_PASSES):
        prev = mask
        mask = _remove_small_regions(mask, area_frac * mask.size)
        for lvl in range(1, levels + 1):
            mask = _majority(mask, 2**lvl + 1)
        if np.array_equal(mask, prev):
            break
    return mask


def compose_focused_texture(t1, t2, omp) -> GrayImage:
    check_same_shape(t1, t2, omp, names=["t1", "t2", "omp"])
    return np.where(np.asarray(omp, dtype=bool), t1, t2)


def texture_weights(tm4, tm3) -> tuple[GrayImage, GrayImage]:
    """Per-pixel weights ``(w4, w3)`` summing to exactly 1."""
    check_same_shape(tm4, tm3, names=["tm4", "tm3"])
    tm4 = np.asarray(tm4, dtype=np.float64)
    tm3 = np.asarray(tm3, dtype=np.float64)
    total = tm3 + tm4
    ok = total >= WEIGHT_EPS
    w4 = np.full_like(total, 0.5)
    np.divide(tm4, total, out=w4, where=ok)
    w4 = np.clip(w4, 0.0, 1.0)
    return w4, 1.0 - w4


def fuse_texture(t4, t3, tm4, tm3) -> GrayImage:
    check_same_shape(t4, t3, tm4, tm3, names=["t4", "t3", "tm4", "tm3"])
    w4, w3 = texture_weights(tm4, tm3)
    out = w4 * t4 + w3 * t3
    # rounding can push a convex combination one ulp outside its endpoints
    return np.clip(out, np.minimum(t3, t4), np.maximum(t3, t4))
