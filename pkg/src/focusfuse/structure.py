"""Global-weight fusion of structure layers.

Each structure layer gets one scalar weight, proportional to the product of
its entropy and an anisotropy feature built from 3x3 DCT blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import GrayImage, as_gray, check_same_shape, entropy

WEIGHT_EPS = 1e-12
PHI_EPS = 1e-12

# (row, col) coefficient positions grouped by orientation
DIRECTION_GROUPS = {
    0: ((0, 1), (0, 2)),
    45: ((1, 1), (2, 2)),
    90: ((1, 0), (2, 0)),
    135: ((1, 2), (2, 1)),
}


def dct_matrix(n: int = 3) -> np.ndarray:
    """Orthonormal DCT-II matrix ``C`` so that ``C @ B @ C.T`` transforms a block."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    c[0] /= math.sqrt(2.0)
    return c


_C3 = dct_matrix(3)


def dct3(block) -> np.ndarray:
    b = np.asarray(block, dtype=np.float64)
    if b.shape != (3, 3):
        raise ValueError(f"expected a 3x3 block, got {b.shape}")
    return _C3 @ b @ _C3.T


def idct3(coef) -> np.ndarray:
    c = np.asarray(coef, dtype=np.float64)
    if c.shape != (3, 3):
        raise ValueError(f"expected a 3x3 block, got {c.shape}")
    return _C3.T @ c @ _C3


def block_coefficients(s, block: int = 3) -> np.ndarray:
    """DCT coefficients of every whole non-overlapping block, shape (nb, b, b)."""
    s = as_gray(s, "structure")
    h, w = s.shape
    if h < block or w < block:
        raise ValueError(f"image {w}x{h} smaller than one {block}x{block} block")
    bh, bw = h // block, w // block
    tiles = s[: bh * block, : bw * block].reshape(bh, block, bw, block).swapaxes(1, 2)
    tiles = tiles.reshape(-1, block, block)
    c = _C3 if block == 3 else dct_matrix(block)
    return np.einsum("ij,njk,lk->nil", c, tiles, c)


def direction_stds(coefs: np.ndarray) -> np.ndarray:
    """Population std of each orientation group, shape (nb, 4) in 0/45/90/135 order."""
    cols = []
    for theta in (0, 45, 90, 135):
        vals = np.stack([coefs[:, r, c] for r, c in DIRECTION_GROUPS[theta]], axis=1)
        cols.append(vals.std(axis=1))
    return np.stack(cols, axis=1)


def freq_variance(s, block: int = 3) -> float:
    """Mean over blocks of the variance of mean-normalized directional stds."""
    if block != 3:
        # directional groups are defined on 3x3 coefficient grids only
        raise ValueError("only 3x3 blocks are supported")
    sig = direction_stds(block_coefficients(s, block))
    phi = sig.mean(axis=1)
    feat = np.zeros(len(sig))
    ok = phi >= PHI_EPS
    feat[ok] = (sig[ok] / phi[ok, None]).var(axis=1)
    return float(feat.mean())


@dataclass
class StructureFeatures:
    psi: float
    entropy_e: float
    weight: float


def structure_weights(structures, shares=None) -> tuple[np.ndarray, list]:
    """Normalized weights ``E*psi / K``; uniform when every product vanishes.

    ``shares`` optionally scales each source's ``E*psi`` before normalizing.
    """
    feats = []
    scores = []
    for s in structures:
        psi = freq_variance(s)
        e = entropy(s)
        feats.append([psi, e])
        scores.append(e * psi)
    scores = np.asarray(scores, dtype=np.float64)
    if shares is not None:
        scores = scores * np.asarray(shares, dtype=np.float64)
    k = scores.sum()
    if k < WEIGHT_EPS:
        w = np.full(len(scores), 1.0 / len(scores))
    else:
        w = scores / k
    info = [StructureFeatures(psi, e, float(wi)) for (psi, e), wi in zip(feats, w)]
    return w, info


def blend(structures, weights) -> GrayImage:
    out = np.zeros_like(np.asarray(structures[0], dtype=np.float64))
    for s, w in zip(structures, weights):
        out = out + w * np.asarray(s, dtype=np.float64)
    lo = np.minimum.reduce([np.asarray(s) for s in structures])
    hi = np.maximum.reduce([np.asarray(s) for s in structures])
    return np.clip(out, lo, hi)


def fuse_structure(structures, shares=None) -> GrayImage:
    structures = [as_gray(s, "structure") for s in structures]
    if not structures:
        raise ValueError("no structure layers given")
    check_same_shape(*structures, names=[f"S{i + 1}" for i in range(len(structures))])
    w, _ = structure_weights(structures, shares)
    return blend(structures, w)
