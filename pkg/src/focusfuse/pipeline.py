"""Decompose, fuse texture and structure, reconstruct.

Three input arrangements are supported:

* ``tri``  - visible A, visible B (different focus) and infrared
* ``mmif`` - one visible and infrared
* ``mfif`` - visible A and visible B
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import structure as st
from . import texture as tx
from .imgcore import GrayImage, as_gray, check_same_shape, rgb_to_luma
from .ssf import SsfParams, decompose


class Mode(str, enum.Enum):
    TRI = "tri"
    MMIF = "mmif"
    MFIF = "mfif"

    @property
    def arity(self) -> int:
        return 3 if self is Mode.TRI else 2


class Chroma(str, enum.Enum):
    GRAY_ONLY = "gray_only"
    CARRY_FROM_VISIBLE = "carry_from_visible"


@dataclass(frozen=True)
class FusionConfig:
    mode: Mode = Mode.TRI
    ssf: SsfParams = field(default_factory=SsfParams)
    pyr_levels: int = 3
    sf_window: int = 7
    grad_p: float = tx.GRAD_P
    cv_levels: int = 3
    cv_area_frac: float = 0.01
    struct_block: int = 3
    # give both visible views one shared modality share in tri mode
    balance_visible: bool = True
    chroma: Chroma = Chroma.CARRY_FROM_VISIBLE
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "chroma", Chroma(self.chroma))
        if self.pyr_levels < 1:
            raise ValueError("pyr_levels must be >= 1")
        if self.sf_window < 3 or self.sf_window % 2 == 0:
            raise ValueError("sf_window must be odd and >= 3")
        if self.struct_block != 3:
            raise ValueError("only struct_block = 3 is supported")


@dataclass
class FusionResult:
    fused: GrayImage
    structures: list
    textures: list
    texture_fused: GrayImage
    structure_fused: GrayImage
    structure_weights: np.ndarray
    saliency: dict = field(default_factory=dict)
    decision: tx.DecisionMaps | None = None

    def artifacts(self) -> dict:
        """Named intermediate images for debug dumps."""
        out = {}
        for i, (s, t) in enumerate(zip(self.structures, self.textures), start=1):
            out[f"S{i}"] = s
            out[f"T{i}"] = t
        for key, maps in self.saliency.items():
            out[f"SM{key}"] = maps.sm
            out[f"TM{key}"] = maps.tm
        if self.decision is not None:
            out["MAP"] = self.decision.map_raw
            out["OMP"] = self.decision.map_verified
        out["FT"] = self.texture_fused
        out["FS"] = self.structure_fused
        out["F"] = self.fused
        return out


def _saliency(t, cfg: FusionConfig) -> tx.SaliencyMaps:
    return tx.salient_feature_map(t, cfg.pyr_levels, cfg.sf_window, cfg.grad_p)


def _decompose_all(images, cfg: FusionConfig):
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.threads, len(images))) as pool:
            return list(pool.map(lambda f: decompose(f, cfg.ssf), images))
    return [decompose(f, cfg.ssf) for f in images]


def fuse_detailed(inputs, cfg: FusionConfig | None = None) -> FusionResult:
    cfg = cfg or FusionConfig()
    mode = cfg.mode
    if len(inputs) != mode.arity:
        raise ValueError(f"mode {mode.value} expects {mode.arity} inputs, got {len(inputs)}")
    images = [as_gray(f, f"input {i + 1}") for i, f in enumerate(inputs)]
    check_same_shape(*images, names=[f"input{i + 1}" for i in range(len(images))])

    parts = _decompose_all(images, cfg)
    structures = [p[0] for p in parts]
    textures = [p[1] for p in parts]
    saliency = {}
    decision = None

    if mode in (Mode.TRI, Mode.MFIF):
        sal1 = _saliency(textures[0], cfg)
        sal2 = _saliency(textures[1], cfg)
        saliency["1"], saliency["2"] = sal1, sal2
        raw = tx.focus_decision(sal1.tm, sal2.tm)
        omp = tx.consistency_verify(raw, cfg.cv_levels, cfg.cv_area_frac)
        decision = tx.DecisionMaps(raw, omp)
        t4 = tx.compose_focused_texture(textures[0], textures[1], omp)
    else:
        t4 = textures[0]

    if mode is Mode.MFIF:
        ft = t4
        shares = None
    else:
        t3 = textures[-1]
        sal4 = _saliency(t4, cfg)
        sal3 = _saliency(t3, cfg)
        saliency["4"], saliency["3"] = sal4, sal3
        ft = tx.fuse_texture(t4, t3, sal4.tm, sal3.tm)
        shares = (0.5, 0.5, 1.0) if mode is Mode.TRI and cfg.balance_visible else None

    weights, _ = st.structure_weights(structures, shares)
    fs = st.blend(structures, weights)
    fused = np.clip(ft + fs, 0.0, 1.0)
    return FusionResult(fused, structures, textures, ft, fs, weights, saliency, decision)


def fuse(inputs, cfg: FusionConfig | None = None) -> GrayImage:
    """Fuse 2 or 3 registered grayscale images according to ``cfg.mode``."""
    return fuse_detailed(inputs, cfg).fused


# ------------------------------------------------------------------- colour

_CB_SCALE = 0.564
_CR_SCALE = 0.713


def rgb_to_ycbcr(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    y = rgb_to_luma(rgb)
    return y, _CB_SCALE * (rgb[..., 2] - y), _CR_SCALE * (rgb[..., 0] - y)


def ycbcr_to_rgb(y, cb, cr):
    r = y + cr / _CR_SCALE
    b = y + cb / _CB_SCALE
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.stack([r, g, b], axis=-1)


def _as_color(img):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an RGB image, got shape {arr.shape}")
    return arr


def fuse_rgb(visible, ir, cfg: FusionConfig | None = None, result: list | None = None) -> np.ndarray:
    """Fuse luminance and carry chroma from the visible side.

    ``visible`` holds one (mmif) or two (tri, mfif) RGB images; ``ir`` is
    grayscale and ignored in mfif mode.  Pass a list as ``result`` to receive
    the :class:`FusionResult` of the luminance fusion.
    """
    cfg = cfg or FusionConfig()
    vis = [_as_color(v) for v in visible]
    expected = 1 if cfg.mode is Mode.MMIF else 2
    if len(vis) != expected:
        raise ValueError(f"mode {cfg.mode.value} expects {expected} visible inputs, got {len(vis)}")
    ycc = [rgb_to_ycbcr(v) for v in vis]
    lumas = [c[0] for c in ycc]
    inputs = lumas + ([] if cfg.mode is Mode.MFIF else [as_gray(ir, "ir")])
    res = fuse_detailed(inputs, cfg)
    if result is not None:
        result.append(res)

    if cfg.chroma is Chroma.GRAY_ONLY:
        return np.repeat(res.fused[..., None], 3, axis=2)
    if cfg.mode is Mode.MMIF:
        cb, cr = ycc[0][1], ycc[0][2]
    else:
        omp = res.decision.map_verified
        cb = np.where(omp, ycc[0][1], ycc[1][1])
        cr = np.where(omp, ycc[0][2], ycc[1][2])
    return np.clip(ycbcr_to_rgb(res.fused, cb, cr), 0.0, 1.0)
