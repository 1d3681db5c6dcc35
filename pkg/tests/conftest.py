import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from focusfuse.imgcore import load_image, load_raster

DATA = Path(__file__).parent / "data"
GRAY_NAMES = ["brick", "camera", "coins", "grass", "gravel", "moon"]

sys.path.insert(0, str(Path(__file__).parent))


def data_path(name: str) -> Path:
    return DATA / f"{name}.png"


def natural(name: str) -> np.ndarray:
    return load_image(data_path(name))


def all_test_images() -> list:
    """Every checked-in image as luminance, in a fixed order."""
    return [natural(n) for n in GRAY_NAMES] + [load_image(data_path("astronaut_rgb"))]


def interior_mask(m1: np.ndarray, dist: float = 10) -> np.ndarray:
    """Pixels at least ``dist`` px (Euclidean) from the mask boundary."""
    inside = ndimage.distance_transform_edt(m1)
    outside = ndimage.distance_transform_edt(~m1)
    return np.maximum(inside, outside) >= dist


@pytest.fixture(scope="session")
def camera():
    return natural("camera")


@pytest.fixture(scope="session")
def astronaut_rgb():
    return load_raster(data_path("astronaut_rgb"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
