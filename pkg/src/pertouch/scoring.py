"""Regional attribute scores in [-1, 1].

Four scalar summaries per region: colorfulness (Hasler-Suesstrunk
opponent statistic, 109.0 anchor), contrast (population luma std with a
0.30 saturation anchor), color temperature (R-B balance over 128), and
brightness (mean luma). Each is monotone in its attribute, depends only
on the multiset of region pixels, and is clamped into range so every
score is a valid map entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .imagecore import Image, luma_of
from .segmentation import SegmentationMap

ATTRIBUTES = ("colorfulness", "contrast", "temperature", "brightness")

CONTRAST_ANCHOR = 0.30  # luma std that saturates the contrast score
COLORFULNESS_ANCHOR = 109.0  # "extremely colorful" scale point of the metric
TEMPERATURE_ANCHOR = 128.0  # R-B channel-mean gap that saturates warmth


def _clamp(value: float) -> float:
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True)
class AttributeVector:
    """One score per attribute, fixed channel order, components in [-1, 1]."""

    colorfulness: float = 0.0
    contrast: float = 0.0
    temperature: float = 0.0
    brightness: float = 0.0

    def __post_init__(self):
        for name in ATTRIBUTES:
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise InvalidArgumentError(f"{name} score {v} outside [-1, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.colorfulness, self.contrast, self.temperature, self.brightness)

    def get(self, attribute: str) -> float:
        if attribute not in ATTRIBUTES:
            raise InvalidArgumentError(f"unknown attribute {attribute!r}")
        return getattr(self, attribute)

    def with_value(self, attribute: str, value: float) -> "AttributeVector":
        if attribute not in ATTRIBUTES:
            raise InvalidArgumentError(f"unknown attribute {attribute!r}")
        return replace(self, **{attribute: value})

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in ATTRIBUTES}

    @classmethod
    def from_dict(cls, data: dict[str, float]) -> "AttributeVector":
        missing = [name for name in ATTRIBUTES if name not in data]
        if missing:
            raise InvalidArgumentError(f"scores missing attributes {missing}")
        return cls(**{name: float(data[name]) for name in ATTRIBUTES})

    def distance(self, other: "AttributeVector") -> float:
        """Euclidean distance in the 4-dimensional score space."""
        return math.sqrt(
            sum((a - b) ** 2 for a, b in zip(self.as_tuple(), other.as_tuple()))
        )


@dataclass(frozen=True)
class RegionScores:
    region_id: int
    scores: AttributeVector


def brightness_of_pixels(rgb: np.ndarray) -> float:
    """2 * mean(luma) - 1 over an (N, 3) pixel array."""
    return _clamp(2.0 * float(np.mean(luma_of(rgb))) - 1.0)


def contrast_of_pixels(rgb: np.ndarray) -> float:
    """Population luma std, saturating at CONTRAST_ANCHOR."""
    sigma = float(np.std(luma_of(rgb)))
    return _clamp(2.0 * min(sigma / CONTRAST_ANCHOR, 1.0) - 1.0)


def colorfulness_of_pixels(rgb: np.ndarray) -> float:
    """Opponent-channel colorfulness, saturating at COLORFULNESS_ANCHOR."""
    arr = np.asarray(rgb, dtype=np.float64)
    rg = arr[..., 0] - arr[..., 1]
    yb = 0.5 * (arr[..., 0] + arr[..., 1]) - arr[..., 2]
    metric = math.sqrt(float(np.var(rg)) + float(np.var(yb))) + 0.3 * math.sqrt(
        float(np.mean(rg)) ** 2 + float(np.mean(yb)) ** 2
    )
    return _clamp(2.0 * min(metric / COLORFULNESS_ANCHOR, 1.0) - 1.0)


def temperature_of_pixels(rgb: np.ndarray) -> float:
    """R-B channel mean balance; positive is warm."""
    arr = np.asarray(rgb, dtype=np.float64)
    return _clamp((float(np.mean(arr[..., 0])) - float(np.mean(arr[..., 2]))) / TEMPERATURE_ANCHOR)


_PIXEL_SCORERS = {
    "colorfulness": colorfulness_of_pixels,
    "contrast": contrast_of_pixels,
    "temperature": temperature_of_pixels,
    "brightness": brightness_of_pixels,
}


def score_pixels(rgb: np.ndarray) -> AttributeVector:
    """All four scores of an (N, 3) or (H, W, 3) pixel array."""
    flat = np.asarray(rgb).reshape(-1, 3)
    if flat.shape[0] == 0:
        raise InvalidArgumentError("cannot score an empty pixel set")
    return AttributeVector(
        colorfulness=colorfulness_of_pixels(flat),
        contrast=contrast_of_pixels(flat),
        temperature=temperature_of_pixels(flat),
        brightness=brightness_of_pixels(flat),
    )


def score_attribute_of_pixels(rgb: np.ndarray, attribute: str) -> float:
    if attribute not in _PIXEL_SCORERS:
        raise InvalidArgumentError(f"unknown attribute {attribute!r}")
    return _PIXEL_SCORERS[attribute](np.asarray(rgb).reshape(-1, 3))


def _region_pixels(img: Image, seg: SegmentationMap, region: int) -> np.ndarray:
    if (seg.width, seg.height) != (img.width, img.height):
        raise InvalidArgumentError(
            f"segmentation {seg.width}x{seg.height} does not match image "
            f"{img.width}x{img.height}"
        )
    return img.pixels[seg.mask(region)]


def score_brightness(img: Image, seg: SegmentationMap, region: int) -> float:
    return brightness_of_pixels(_region_pixels(img, seg, region))


def score_contrast(img: Image, seg: SegmentationMap, region: int) -> float:
    return contrast_of_pixels(_region_pixels(img, seg, region))


def score_colorfulness(img: Image, seg: SegmentationMap, region: int) -> float:
    return colorfulness_of_pixels(_region_pixels(img, seg, region))


def score_temperature(img: Image, seg: SegmentationMap, region: int) -> float:
    return temperature_of_pixels(_region_pixels(img, seg, region))


def score_region(img: Image, seg: SegmentationMap, region: int) -> AttributeVector:
    """All four attribute scores of one region, fixed channel order."""
    return score_pixels(_region_pixels(img, seg, region))


def score_image(img: Image) -> AttributeVector:
    """Whole-image scores (the single-region case)."""
    return score_pixels(img.pixels)
