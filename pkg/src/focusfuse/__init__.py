"""All-in-focus multi-modal image fusion."""
from .imgcore import gaussian_blur, load_image, save_image
from .pipeline import Chroma, FusionConfig, Mode, fuse, fuse_detailed, fuse_rgb
from .ssf import SsfParams, decompose, ssf_smooth

__all__ = [
    "Chroma",
    "FusionConfig",
    "Mode",
    "SsfParams",
    "decompose",
    "fuse",
    "fuse_detailed",
    "fuse_rgb",
    "gaussian_blur",
    "load_image",
    "save_image",
    "ssf_smooth",
]

__version__ = "0.1.0"
