"""Synthetic multi-focus pairs with ground-truth masks.

A clear image is split by a random binary mask into two complementary
focus regions; each output keeps one region sharp and Gaussian-blurs the
other.  Mask generation runs on a fixed xorshift64* stream so results are
identical on every platform for a given seed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .imgcore import BinaryMask, GrayImage, as_gray, check_same_shape, gaussian_blur

MASK64 = (1 << 64) - 1
MIN_AREA = 0.2
MAX_AREA = 0.8
MAX_TRIES = 1000


class XorShift64Star:
    """xorshift64* (shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D).

    The user seed is scrambled with one splitmix64 step so that seed 0 and
    nearby seeds give unrelated, nonzero states.
    """

    MULT = 0x2545F4914F6CDD1D

    def __init__(self, seed: int):
        z = (int(seed) + 0x9E3779B97F4A7C15) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        z ^= z >> 31
        self.state = z or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * self.MULT) & MASK64

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        # 53 high bits -> double in [0, 1)
        return lo + (hi - lo) * ((self.next_u64() >> 11) * (1.0 / (1 << 53)))

    def randint(self, n: int) -> int:
        return self.next_u64() % n


class ShapeKind(str, enum.Enum):
    HALF_PLANE = "half_plane"
    RECT = "rect"
    ELLIPSE = "ellipse"
    POLY_BLOB = "poly_blob"


SHAPE_ORDER = (ShapeKind.HALF_PLANE, ShapeKind.RECT, ShapeKind.ELLIPSE, ShapeKind.POLY_BLOB)


@dataclass(frozen=True)
class MaskSpec:
    seed: int = 0
    shape_kind: ShapeKind | None = None  # None: drawn uniformly per seed

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.shape_kind is not None:
            object.__setattr__(self, "shape_kind", ShapeKind(self.shape_kind))


@dataclass
class MaskInfo:
    shape: ShapeKind
    area_frac: float
    params: dict


def _grid(width, height):
    # pixel centres normalized to [0, 1]
    x = (np.arange(width) + 0.5) / width
    y = (np.arange(height) + 0.5) / height
    return np.meshgrid(x, y)


def _half_plane(rng, xx, yy):
    angle = rng.uniform(0.0, 2.0 * math.pi)
    cx, cy = rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)
    nx, ny = math.cos(angle), math.sin(angle)
    return (xx - cx) * nx + (yy - cy) * ny > 0, {"angle": angle, "cx": cx, "cy": cy}


def _rect(rng, xx, yy):
    w, h = rng.uniform(0.4, 0.95), rng.uniform(0.4, 0.95)
    x0, y0 = rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h)
    m = (xx >= x0) & (xx < x0 + w) & (yy >= y0) & (yy < y0 + h)
    return m, {"x0": x0, "y0": y0, "w": w, "h": h}


def _ellipse(rng, xx, yy):
    cx, cy = rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75)
    ax, ay = rng.uniform(0.25, 0.6), rng.uniform(0.25, 0.6)
    rot = rng.uniform(0.0, math.pi)
    c, s = math.cos(rot), math.sin(rot)
    u = (xx - cx) * c + (yy - cy) * s
    v = -(xx - cx) * s + (yy - cy) * c
    m = (u / ax) ** 2 + (v / ay) ** 2 <= 1.0
    return m, {"cx": cx, "cy": cy, "ax": ax, "ay": ay, "rot": rot}


def _poly_blob(rng, xx, yy):
    # star-shaped region: radius varies smoothly with angle
    cx, cy = rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)
    base = rng.uniform(0.3, 0.5)
    harmonics = [(k, rng.uniform(0.0, 0.25 / k), rng.uniform(0.0, 2.0 * math.pi)) for k in range(2, 6)]
    theta = np.arctan2(yy - cy, xx - cx)
    radius = np.full_like(theta, base)
    for k, amp, phase in harmonics:
        radius = radius + base * amp * np.cos(k * theta + phase)
    m = np.hypot(xx - cx, yy - cy) <= radius
    return m, {"cx": cx, "cy": cy, "base": base}


_SHAPES = {
    ShapeKind.HALF_PLANE: _half_plane,
    ShapeKind.RECT: _rect,
    ShapeKind.ELLIPSE: _ellipse,
    ShapeKind.POLY_BLOB: _poly_blob,
}


def gen_mask_pair_info(width: int, height: int, spec: MaskSpec) -> tuple[BinaryMask, BinaryMask, MaskInfo]:
    if width <= 0 or height <= 0:
        raise ValueError("mask dimensions must be positive")
    rng = XorShift64Star(spec.seed)
    kind = spec.shape_kind or SHAPE_ORDER[rng.randint(len(SHAPE_ORDER))]
    xx, yy = _grid(width, height)
    for _ in range(MAX_TRIES):
        m1, params = _SHAPES[kind](rng, xx, yy)
        area = float(m1.mean())
        if MIN_AREA <= area <= MAX_AREA:
            break
    else:
        # tiny rasters cannot always hit the band; fall back to a split
        # whose area is as close to one half as the grid allows
        m1 = xx < 0.5 if width > 1 else yy < 0.5
        area = float(m1.mean())
        params = {"fallback": True}
    return m1, ~m1, MaskInfo(kind, area, params)


def gen_mask_pair(width: int, height: int, spec: MaskSpec) -> tuple[BinaryMask, BinaryMask]:
    m1, m2, _ = gen_mask_pair_info(width, height, spec)
    return m1, m2


def simulate_defocus(f_clear, m1, m2, sigma: float = 5.0) -> tuple[GrayImage, GrayImage]:
    """Return ``(f1, f2)``: f1 sharp on ``m1``, f2 sharp on ``m2``."""
    f_clear = as_gray(f_clear, "clear image")
    m1 = np.asarray(m1, dtype=bool)
    m2 = np.asarray(m2, dtype=bool)
    check_same_shape(f_clear, m1, m2, names=["image", "m1", "m2"])
    if not np.all(m1 ^ m2):
        raise ValueError("masks are not complementary")
    f_blur = gaussian_blur(f_clear, sigma)
    f1 = np.where(m1, f_clear, f_blur)
    f2 = np.where(m2, f_clear, f_blur)
    return f1, f2
