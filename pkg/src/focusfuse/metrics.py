"""Objective fusion-quality metrics.

All scores are computed on the 0-255 intensity scale; inputs are [0, 1]
images.  ``q_g`` is the Xydeas-Petrovic gradient-transfer metric, ``q_s``
Piella's variance-weighted universal-quality-index metric, and ``q_m`` a
two-level Haar edge-preservation metric.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .imgcore import as_gray, check_same_shape

PEAK = 255.0
PSNR_CAP = 100.0

# Xydeas-Petrovic sigmoid constants
GAMMA_G, KAPPA_G, SIGMA_G = 0.9994, -15.0, 0.5
GAMMA_A, KAPPA_A, SIGMA_A = 0.9879, -22.0, 0.8

QS_WINDOW = 8
# far below the variance of one gray-level step inside a window
VAR_FLOOR = 1e-8
QM_LEVEL_WEIGHTS = (2.0 / 3.0, 1.0 / 3.0)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T


def _scaled(img, name="image"):
    return as_gray(img, name) * PEAK


def _check_min_size(img, n=2):
    if img.shape[0] < n or img.shape[1] < n:
        raise ValueError(f"image must be at least {n}x{n}")


def avg_gradient(f) -> float:
    f = _scaled(f)
    _check_min_size(f)
    dx = f[:-1, 1:] - f[:-1, :-1]
    dy = f[1:, :-1] - f[:-1, :-1]
    return float(np.mean(np.sqrt((dx * dx + dy * dy) / 2.0)))


def spatial_frequency(f) -> float:
    f = _scaled(f)
    _check_min_size(f)
    rf2 = np.mean((f[:, 1:] - f[:, :-1]) ** 2)
    cf2 = np.mean((f[1:, :] - f[:-1, :]) ** 2)
    return float(math.sqrt(rf2 + cf2))


def psnr(a, b) -> float:
    check_same_shape(a, b, names=["a", "b"])
    mse = float(np.mean((_scaled(a) - _scaled(b)) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(PEAK * PEAK / mse))


def psnr_fusion(fused, sources) -> float:
    """Arithmetic mean of the per-source PSNR values (dB)."""
    if not sources:
        raise ValueError("no source images")
    return float(np.mean([psnr(fused, s) for s in sources]))


# ------------------------------------------------------------------- Q_G


def _sobel(img):
    gx = ndimage.correlate(img, SOBEL_X, mode="reflect")
    gy = ndimage.correlate(img, SOBEL_Y, mode="reflect")
    strength = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        angle = np.arctan(gy / gx)
    angle[gx == 0] = math.pi / 2
    return strength, angle


def _edge_preservation(gs, a_s, gf, a_f):
    hi = np.maximum(gs, gf)
    lo = np.minimum(gs, gf)
    g = np.ones_like(gs)
    np.divide(lo, hi, out=g, where=hi > 0)
    a = 1.0 - np.abs(a_s - a_f) / (math.pi / 2)
    qg = GAMMA_G / (1.0 + np.exp(KAPPA_G * (g - SIGMA_G)))
    qa = GAMMA_A / (1.0 + np.exp(KAPPA_A * (a - SIGMA_A)))
    return qg * qa


def q_g(fused, a, b) -> float:
    """Gradient-information transfer from sources ``a`` and ``b`` to ``fused``."""
    check_same_shape(fused, a, b, names=["fused", "a", "b"])
    gf, af = _sobel(_scaled(fused, "fused"))
    ga, aa = _sobel(_scaled(a, "a"))
    gb, ab = _sobel(_scaled(b, "b"))
    qaf = _edge_preservation(ga, aa, gf, af)
    qbf = _edge_preservation(gb, ab, gf, af)
    den = float(np.sum(ga + gb))
    if den == 0:
        return 0.0
    return float(np.clip(np.sum(qaf * ga + qbf * gb) / den, 0.0, 1.0))


# ------------------------------------------------------------------- Q_S


def _window_stats(x, y, w):
    """Means, variances and covariance over every ``w`` x ``w`` valid window."""
    # centring keeps the running sums small; restored on the means below
    ox, oy = float(x.mean()), float(y.mean())
    x = x - ox
    y = y - oy

    def box(z):
        c = np.cumsum(np.cumsum(np.pad(z, ((1, 0), (1, 0))), axis=0), axis=1)
        return (c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]) / (w * w)

    mx, my = box(x), box(y)
    vx = box(x * x) - mx * mx
    vy = box(y * y) - my * my
    cxy = box(x * y) - mx * my
    # flat windows must come out exactly flat for the zero guards in uiqi_map
    vx[vx < VAR_FLOOR] = 0.0
    vy[vy < VAR_FLOOR] = 0.0
    cxy[(vx == 0) | (vy == 0)] = 0.0
    return mx + ox, my + oy, vx, vy, cxy


def uiqi_map(mx, my, vx, vy, cxy):
    """Universal image quality index per window, with the usual zero guards."""
    num = 4.0 * cxy * mx * my
    d1 = vx + vy
    d2 = mx * mx + my * my
    q = np.ones_like(mx)
    both = (d1 > 0) & (d2 > 0)
    q[both] = num[both] / (d1[both] * d2[both])
    only_mean = (d1 == 0) & (d2 > 0)
    q[only_mean] = 2.0 * mx[only_mean] * my[only_mean] / d2[only_mean]
    only_var = (d1 > 0) & (d2 == 0)
    q[only_var] = 2.0 * cxy[only_var] / d1[only_var]
    return q


def q_s(fused, a, b, window: int = QS_WINDOW) -> float:
    """Piella's fusion quality index with local-variance saliency weights."""
    check_same_shape(fused, a, b, names=["fused", "a", "b"])
    f = _scaled(fused, "fused")
    x = _scaled(a, "a")
    y = _scaled(b, "b")
    _check_min_size(f, window)
    ma, mf, va, vf, caf = _window_stats(x, f, window)
    mb, _, vb, _, cbf = _window_stats(y, f, window)
    qa = uiqi_map(ma, mf, va, vf, caf)
    qb = uiqi_map(mb, mf, vb, vf, cbf)
    total = va + vb
    lam = np.full_like(total, 0.5)
    np.divide(va, total, out=lam, where=total > 0)
    score = lam * qa + (1.0 - lam) * qb
    return float(np.clip(np.mean(score), 0.0, 1.0))


# ------------------------------------------------------------------- Q_M


def haar2(img):
    """One orthonormal 2-D Haar step: (approx, (horizontal, vertical, diagonal))."""
    a = img[0::2, 0::2]
    b = img[0::2, 1::2]
    c = img[1::2, 0::2]
    d = img[1::2, 1::2]
    approx = (a + b + c + d) / 2.0
    horiz = (a + b - c - d) / 2.0
    vert = (a - b + c - d) / 2.0
    diag = (a - b - c + d) / 2.0
    return approx, (horiz, vert, diag)


def _pad_to_multiple(img, m):
    h, w = img.shape
    ph, pw = (-h) % m, (-w) % m
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw)), mode="symmetric")
    return img


def _band_score(ca, cb, cf):
    ea = np.exp(-np.abs(ca - cf))
    eb = np.exp(-np.abs(cb - cf))
    wa = ca * ca
    wb = cb * cb
    den = float(np.sum(wa + wb))
    if den == 0:
        # no edge content in either source: perfect iff the fused band is flat too
        return float(np.exp(-np.mean(np.abs(cf))))
    return float(np.sum(ea * wa + eb * wb) / den)


def q_m(fused, a, b) -> float:
    """Two-level Haar edge-preservation score, levels weighted 2/3 and 1/3."""
    check_same_shape(fused, a, b, names=["fused", "a", "b"])
    imgs = [_pad_to_multiple(_scaled(x), 4) for x in (fused, a, b)]
    score = 0.0
    for weight in QM_LEVEL_WEIGHTS:
        decomposed = [haar2(x) for x in imgs]
        bands = [
            _band_score(decomposed[1][1][k], decomposed[2][1][k], decomposed[0][1][k])
            for k in range(3)
        ]
        score += weight * float(np.mean(bands))
        imgs = [d[0] for d in decomposed]
    return float(score)


# ---------------------------------------------------------------- report


@dataclass
class FusionReport:
    id: str
    q_g: float
    q_m: float
    q_s: float
    ag: float
    sf: float
    psnr: float
    runtime_ms: float = 0.0

    FIELDS = ("id", "q_g", "q_m", "q_s", "ag", "sf", "psnr", "runtime_ms")

    def row(self) -> dict:
        return asdict(self)


def evaluate(fused, a, b, ident: str = "", runtime_ms: float = 0.0, psnr_refs=None) -> FusionReport:
    """All six scores for one fused image against sources ``a`` and ``b``."""
    refs = psnr_refs if psnr_refs is not None else [a, b]
    return FusionReport(
        id=ident,
        q_g=q_g(fused, a, b),
        q_m=q_m(fused, a, b),
        q_s=q_s(fused, a, b),
        ag=avg_gradient(fused),
        sf=spatial_frequency(fused),
        psnr=psnr_fusion(fused, refs),
        runtime_ms=runtime_ms,
    )


def mean_report(reports) -> FusionReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    vals = {k: float(np.mean([getattr(r, k) for r in reports])) for k in FusionReport.FIELDS[1:]}
    return FusionReport(id="MEAN", **vals)
