import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from pertouch.imagecore import Image
from pertouch.segmentation import SegmentationMap, grid_segmentation


def solid_image(width, height, rgb):
    arr = np.empty((height, width, 3), dtype=np.uint8)
    arr[:] = rgb
    return Image(arr)


def smooth_image(width, height, seed, mean=0.5, luma_spread=0.12, tint=0.08, blur=4.0):
    """Photo-like synthetic with mid-range scores on every attribute.

    A smooth luminance field normalized to a controlled spread, plus a
    smooth color cast, so contrast/colorfulness land away from clamps.
    """
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.normal(0.0, 1.0, (height, width)), blur)
    base = (base - base.mean()) / max(base.std(), 1e-9) * luma_spread + mean
    cast = gaussian_filter(rng.normal(0.0, 1.0, (height, width, 3)), (blur, blur, 0))
    cast = (cast - cast.mean(axis=(0, 1))) / np.maximum(cast.std(axis=(0, 1)), 1e-9) * tint
    arr = base[..., None] + cast
    return Image(np.clip(arr * 255.0, 0, 255).astype(np.uint8))


def noise_image(width, height, seed):
    rng = np.random.default_rng(seed)
    return Image(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def split_segmentation(width, height, labels=("left", "right")):
    """Two vertical half-plane regions."""
    arr = np.zeros((height, width), dtype=np.uint32)
    arr[:, width // 2 :] = 1
    return SegmentationMap(arr, {0: labels[0], 1: labels[1]})


def full_segmentation(img, label="whole"):
    return SegmentationMap(
        np.zeros((img.height, img.width), dtype=np.uint32), {0: label}
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
