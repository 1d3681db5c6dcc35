"""Raster primitives shared by every stage of the fusion pipeline.

Images are plain 2-D ``float64`` numpy arrays with nominal range [0, 1];
masks are 2-D ``bool`` arrays of the same shape.  Every filter here uses
symmetric (half-sample mirror) boundaries.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

GrayImage = np.ndarray
BinaryMask = np.ndarray

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


class ImageReadError(OSError):
    pass


class ImageWriteError(OSError):
    pass


def as_gray(img, name: str = "image") -> GrayImage:
    """Validate and coerce ``img`` to a finite 2-D float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_same_shape(*arrays, names=None) -> None:
    shapes = [np.shape(a) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        labels = names or [f"#{i}" for i in range(len(arrays))]
        desc = ", ".join(f"{n}={s[1]}x{s[0]}" for n, s in zip(labels, shapes))
        raise ValueError(f"dimension mismatch: {desc}")


def rgb_to_luma(rgb: np.ndarray) -> GrayImage:
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


# ---------------------------------------------------------------- file I/O


def _decode(pil: Image.Image) -> np.ndarray:
    mode = pil.mode
    if mode == "L":
        return np.asarray(pil, dtype=np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L"):
        return np.asarray(pil, dtype=np.float64) / 65535.0
    if mode == "I":
        # PNG 16-bit grayscale is surfaced by Pillow as 32-bit "I"
        arr = np.asarray(pil, dtype=np.float64)
        if arr.min() < 0 or arr.max() > 65535:
            raise ImageReadError(f"unsupported bit depth: mode {mode}")
        return arr / 65535.0
    if mode in ("RGB", "RGBA"):
        return np.asarray(pil.convert("RGB"), dtype=np.float64) / 255.0
    raise ImageReadError(f"unsupported bit depth: mode {mode}")


def load_raster(path) -> np.ndarray:
    """Load a raster as floats in [0, 1]; shape (H, W) or (H, W, 3)."""
    path = Path(path)
    try:
        with Image.open(path) as pil:
            pil.load()
            arr = _decode(pil)
    except ImageReadError:
        raise
    except (OSError, ValueError, SyntaxError) as exc:
        raise ImageReadError(f"unreadable file: {path} ({exc})") from exc
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ImageReadError(f"zero-sized image: {path}")
    return arr


def load_image(path) -> GrayImage:
    """Load a grayscale or RGB raster as a luminance image in [0, 1]."""
    arr = load_raster(path)
    if arr.ndim == 3:
        arr = rgb_to_luma(arr)
    return np.ascontiguousarray(arr)


def quantize(img) -> np.ndarray:
    """Clamp to [0, 1] and quantize to uint8 with round-half-up."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def _format_for(path: Path) -> str:
    ext = path.suffix.lower()
    if ext in (".pgm", ".ppm", ".pnm"):
        return "PPM"
    if ext == ".png":
        return "PNG"
    raise ImageWriteError(f"unsupported output extension {ext!r}: {path}")


def save_image(img, path) -> None:
    """Write a gray (H, W) or RGB (H, W, 3) image as 8-bit PNG / PNM."""
    path = Path(path)
    fmt = _format_for(path)
    data = quantize(img)
    if data.ndim == 3 and path.suffix.lower() == ".pgm":
        raise ImageWriteError(f"cannot write RGB data as graymap: {path}")
    try:
        # PNG metadata is left empty so repeated writes are byte-identical
        Image.fromarray(data).save(path, format=fmt)
    except OSError as exc:
        raise ImageWriteError(f"unwritable path: {path} ({exc})") from exc


def save_mask(mask, path) -> None:
    save_image(np.asarray(mask, dtype=np.float64), path)


# ------------------------------------------------------------- filtering


def convolve2d(img, kernel) -> GrayImage:
    """2-D convolution, same-size output, mirror boundaries.

    Kernels must have odd extents, except the 1x2 / 2x1 difference
    operators.  Those are laid over samples ``(x, x+1)`` as written, so
    ``[-1, 1]`` yields the forward difference ``f[x+1] - f[x]`` (zero in
    the last column under mirroring).
    """
    img = as_gray(img)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim == 1:
        k = k[np.newaxis, :]
    if k.size == 0 or k.ndim != 2:
        raise ValueError("empty kernel")
    if all(n % 2 == 1 for n in k.shape):
        return ndimage.convolve(img, k, mode="reflect")
    if k.shape in ((1, 2), (2, 1)):
        origin = (0, -1) if k.shape == (1, 2) else (-1, 0)
        return ndimage.correlate(img, k, mode="reflect", origin=origin)
    raise ValueError(f"kernel extents must be odd (or a 2-tap difference), got {k.shape}")


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma: float) -> GrayImage:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    img = as_gray(img)
    k = gaussian_kernel1d(sigma)
    out = ndimage.correlate1d(img, k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def entropy(img) -> float:
    """Shannon entropy in bits over 256 uniform bins on [0, 1]."""
    arr = np.clip(as_gray(img), 0.0, 1.0)
    hist, _ = np.histogram(arr, bins=256, range=(0.0, 1.0))
    p = hist[hist > 0] / arr.size
    return float(max(0.0, -np.sum(p * np.log2(p))))


# ------------------------------------------------------------ resampling


def downsample2(img) -> GrayImage:
    """Binomial blur then keep every second sample; size ceil(n/2)."""
    img = as_gray(img)
    out = ndimage.correlate1d(img, BINOMIAL5, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, BINOMIAL5, axis=1, mode="reflect")
    return out[::2, ::2].copy()


def _upsample_axis(arr: np.ndarray, axis: int, target: int) -> np.ndarray:
    n = arr.shape[axis]
    if (target + 1) // 2 != n:
        raise ValueError(
            f"upsample target {target} inconsistent with size {n} (need ceil(target/2) == {n})"
        )
    pad = 2
    widths = [(0, 0)] * arr.ndim
    widths[axis] = (pad, pad)
    src = np.pad(arr, widths, mode="symmetric")
    shape = list(src.shape)
    shape[axis] = 2 * src.shape[axis]
    fine = np.zeros(shape)
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(0, None, 2)
    fine[tuple(sl)] = src
    fine = ndimage.correlate1d(fine, 2.0 * BINOMIAL5, axis=axis, mode="constant")
    sl[axis] = slice(2 * pad, 2 * pad + target)
    return fine[tuple(sl)]


def upsample2(img, target_w: int, target_h: int) -> GrayImage:
    """Zero-insertion to ``(target_h, target_w)`` followed by the doubled binomial."""
    img = as_gray(img)
    out = _upsample_axis(img, 0, target_h)
    return np.ascontiguousarray(_upsample_axis(out, 1, target_w))
