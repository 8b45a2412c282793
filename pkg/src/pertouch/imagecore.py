"""Owned 8-bit RGB raster type, luma math, Gaussian blur and PSNR.

Everything downstream (scoring, feathering, the parametric generator)
goes through this module, so the conventions are pinned here once:
Rec. 709 luma, clamp-to-edge blur borders, PSNR against peak 255.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import correlate1d

from .errors import FormatError, InvalidArgumentError

# Rec. 709 luma weights for sRGB content.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)


class Image:
    """Immutable row-major 8-bit RGB raster."""

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray):
        arr = np.array(data, dtype=np.uint8, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidArgumentError(f"expected (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError("image must be at least 1x1")
        arr.flags.writeable = False
        self._data = arr

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def pixels(self) -> np.ndarray:
        """Read-only (H, W, 3) uint8 view."""
        return self._data

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            np.array_equal(self._data, other._data)
        )

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height})"

    @classmethod
    def from_file(cls, path: str | Path) -> "Image":
        """Decode a PNG or JPEG file into an owned RGB raster."""
        try:
            with PILImage.open(path) as im:
                if im.format not in ("PNG", "JPEG"):
                    raise FormatError(f"unsupported image format {im.format!r} in {path}")
                return cls(np.asarray(im.convert("RGB")))
        except FormatError:
            raise
        except FileNotFoundError:
            raise
        except Exception as exc:
            raise FormatError(f"cannot decode image {path}: {exc}") from exc

    def save_png(self, path: str | Path) -> None:
        PILImage.fromarray(self._data, mode="RGB").save(path, format="PNG")

    def png_bytes(self) -> bytes:
        import io

        buf = io.BytesIO()
        PILImage.fromarray(self._data, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, blob: bytes) -> "Image":
        import io

        try:
            with PILImage.open(io.BytesIO(blob)) as im:
                return cls(np.asarray(im.convert("RGB")))
        except Exception as exc:
            raise FormatError(f"cannot decode image bytes: {exc}") from exc


@dataclass(frozen=True)
class LumaPlane:
    """Per-pixel luma in [0, 1], same grid as its source image."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise InvalidArgumentError(f"luma plane must be 2-D, got shape {v.shape}")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def luma_of(rgb: np.ndarray) -> np.ndarray:
    """Rec. 709 luma of float or integer RGB values, scaled to [0, 1].

    Accepts any (..., 3) array in 0..255 units.
    """
    r, g, b = LUMA_WEIGHTS
    arr = np.asarray(rgb, dtype=np.float64)
    return (r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]) / 255.0


def to_luma(img: Image) -> LumaPlane:
    """Project an image onto its Rec. 709 luma plane."""
    return LumaPlane(luma_of(img.pixels))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian, radius ceil(3*sigma)."""
    if sigma <= 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur_values(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a 2-D float array, clamp-to-edge borders."""
    k = gaussian_kernel(sigma)
    out = correlate1d(np.asarray(values, dtype=np.float64), k, axis=0, mode="nearest")
    return correlate1d(out, k, axis=1, mode="nearest")


def gaussian_blur(plane: LumaPlane, sigma: float) -> LumaPlane:
    """Blur a luma plane. Non-positive sigma is rejected."""
    return LumaPlane(blur_values(plane.values, sigma))


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB over all channels, peak 255.

    Identical images return ``math.inf``.
    """
    if a.width != b.width or a.height != b.height:
        raise InvalidArgumentError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)
