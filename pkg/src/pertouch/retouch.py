"""Deterministic parametric generator: move region scores toward map targets.

The generator realizes ``render(image, map) -> image`` with explicit
monotone per-attribute transfer operators, a bisection solver that
inverts each scorer, and feathered per-region strength blending. A
remote HTTP backend honoring the same contract can be swapped in by
name, so a learned model can replace the parametric one later.

All math runs in [0, 1]-normalized channel space; quantization back to
8 bits happens once, after the full attribute composition.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .imagecore import LUMA_WEIGHTS, Image, blur_values
from .parammap import ParameterMap, decode_pmap, encode_pmap
from .scoring import ATTRIBUTES, score_attribute_of_pixels
from .segmentation import SegmentationMap

# Attributes compose in this fixed order. The order is not commutative
# (brightness shifts contrast statistics, for example); residual
# cross-attribute error is closed by the agent's feedback loop.
COMPOSITION_ORDER = ("temperature", "brightness", "contrast", "colorfulness")

CONTRAST_GAIN = 0.8
CHROMA_GAIN = 0.8
TEMPERATURE_GAIN = 0.3


@dataclass(frozen=True)
class TransferConfig:
    """Reference-generator knobs.

    ``feather_sigma`` None means max(2, 1% of the shorter image side).
    """

    feather_sigma: float | None = None
    strength_bounds: tuple[float, float] = (-1.0, 1.0)
    max_iterations: int = 24
    score_tolerance: float = 0.02

    def __post_init__(self):
        if self.score_tolerance <= 0:
            raise InvalidArgumentError("score_tolerance must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be at least 1")
        lo, hi = self.strength_bounds
        if not (-1.0 <= lo < hi <= 1.0):
            raise InvalidArgumentError(f"invalid strength bounds ({lo}, {hi})")

    def resolved_feather_sigma(self, width: int, height: int) -> float:
        if self.feather_sigma is not None:
            return self.feather_sigma
        return max(2.0, 0.01 * min(width, height))


def _luma01(values: np.ndarray) -> np.ndarray:
    r, g, b = LUMA_WEIGHTS
    return r * values[..., 0] + g * values[..., 1] + b * values[..., 2]


def _check_strength(u) -> None:
    u = np.asarray(u)
    if np.any(u < -1.0) or np.any(u > 1.0):
        raise InvalidArgumentError("strength u outside [-1, 1]")


def apply_transfer(values: np.ndarray, attribute: str, u) -> np.ndarray:
    """One attribute operator on [0, 1] floats; ``u`` may be per-pixel.

    brightness scales exposure by 2**u (one stop either way), contrast
    scales around mid-gray, colorfulness scales chroma around the pixel
    luma, temperature trades R against B. Results clamp to [0, 1].
    """
    _check_strength(u)
    u = np.asarray(u, dtype=np.float64)
    u_c = u[..., None] if u.ndim else u  # broadcast across channels
    if attribute == "brightness":
        out = values * np.exp2(u_c)
    elif attribute == "contrast":
        out = 0.5 + (values - 0.5) * (1.0 + CONTRAST_GAIN * u_c)
    elif attribute == "colorfulness":
        y = _luma01(values)[..., None]
        out = y + (values - y) * (1.0 + CHROMA_GAIN * u_c)
    elif attribute == "temperature":
        out = values.copy()
        out[..., 0] = values[..., 0] * (1.0 + TEMPERATURE_GAIN * u)
        out[..., 2] = values[..., 2] * (1.0 - TEMPERATURE_GAIN * u)
    else:
        raise InvalidArgumentError(f"unknown attribute {attribute!r}")
    return np.clip(out, 0.0, 1.0)


def quantize(values: np.ndarray) -> np.ndarray:
    """[0, 1] floats back to uint8 levels."""
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def transfer_pixel(
    pixel: tuple[int, int, int], attribute: str, u: float
) -> tuple[int, int, int]:
    """Single-pixel convenience wrapper around :func:`apply_transfer`."""
    arr = np.asarray(pixel, dtype=np.float64) / 255.0
    out = quantize(apply_transfer(arr, attribute, u))
    return (int(out[0]), int(out[1]), int(out[2]))


class FeatherField:
    """Per-region blend weights forming a partition of unity.

    Region indicators are blurred and renormalized pixelwise, so edit
    strengths fade across boundaries instead of stepping.
    """

    __slots__ = ("_weights", "_region_ids")

    def __init__(self, weights: np.ndarray, region_ids: tuple[int, ...]):
        self._weights = weights
        self._region_ids = region_ids

    @property
    def region_ids(self) -> tuple[int, ...]:
        return self._region_ids

    def weight(self, region: int) -> np.ndarray:
        return self._weights[self._region_ids.index(region)]

    def blend(self, strengths: dict[int, float]) -> np.ndarray:
        """Per-pixel strength: sum of region weights times region strengths."""
        out = np.zeros(self._weights.shape[1:], dtype=np.float64)
        for idx, rid in enumerate(self._region_ids):
            u = strengths.get(rid, 0.0)
            if u != 0.0:
                out += self._weights[idx] * u
        return out


def feather(seg: SegmentationMap, sigma: float) -> FeatherField:
    """Blurred, renormalized region indicators; sigma 0 keeps hard edges."""
    if sigma < 0:
        raise InvalidArgumentError("feather sigma must be non-negative")
    ids = tuple(info.id for info in seg.regions)
    planes = np.empty((len(ids), seg.height, seg.width), dtype=np.float64)
    for idx, rid in enumerate(ids):
        indicator = (seg.labels == rid).astype(np.float64)
        planes[idx] = blur_values(indicator, sigma) if sigma > 0 else indicator
    planes /= planes.sum(axis=0)
    return FeatherField(planes, ids)


@dataclass(frozen=True)
class StrengthSolution:
    """Outcome of inverting one scorer for one region."""

    u: float
    saturated: bool
    score: float
    iterations: int


def solve_strength(
    img: Image,
    seg: SegmentationMap,
    region: int,
    attribute: str,
    target_score: float,
    cfg: TransferConfig | None = None,
) -> StrengthSolution:
    """Bisect for the strength whose re-scored region matches the target.

    The scored quantity is the quantized transfer of the unfeathered
    region pixels, exactly what a full-weight region receives in
    :func:`render`. Unattainable targets return the strength bound with
    the saturated flag set; saturation is an outcome, not an error.
    """
    if not -1.0 <= target_score <= 1.0:
        raise InvalidArgumentError(f"target score {target_score} outside [-1, 1]")
    if (seg.width, seg.height) != (img.width, img.height):
        raise InvalidArgumentError("segmentation does not match image dimensions")
    cfg = cfg or TransferConfig()
    pixels = img.pixels[seg.mask(region)].astype(np.float64) / 255.0

    def scored(u: float) -> float:
        return score_attribute_of_pixels(quantize(apply_transfer(pixels, attribute, u)), attribute)

    lo, hi = cfg.strength_bounds
    tol = cfg.score_tolerance
    s_lo, s_hi = scored(lo), scored(hi)
    saturated = target_score >= s_hi or target_score <= s_lo
    mid, s_mid = lo, s_lo
    if lo <= 0.0 <= hi:
        # Prefer zero strength whenever it already meets the target:
        # unchanged regions then contribute nothing through the feather
        # blend of their neighbors.
        s_zero = scored(0.0)
        if abs(s_zero - target_score) <= tol:
            return StrengthSolution(0.0, saturated, s_zero, 0)
        if not saturated:
            if s_zero < target_score:
                lo = 0.0
            else:
                hi = 0.0
        mid, s_mid = 0.0, s_zero
    if target_score >= s_hi:
        return StrengthSolution(cfg.strength_bounds[1], True, s_hi, 0)
    if target_score <= s_lo:
        return StrengthSolution(cfg.strength_bounds[0], True, s_lo, 0)
    for i in range(cfg.max_iterations):
        mid = 0.5 * (lo + hi)
        s_mid = scored(mid)
        if abs(s_mid - target_score) <= tol:
            return StrengthSolution(mid, False, s_mid, i + 1)
        if s_mid < target_score:
            lo = mid
        else:
            hi = mid
    return StrengthSolution(mid, False, s_mid, cfg.max_iterations)


def solve_strengths(
    img: Image, pm: ParameterMap, cfg: TransferConfig
) -> dict[int, dict[str, StrengthSolution]]:
    """Solve every (region, attribute) cell of a map."""
    return {
        info.id: {
            attribute: solve_strength(
                img, pm.seg, info.id, attribute, pm.scores[info.id].get(attribute), cfg
            )
            for attribute in ATTRIBUTES
        }
        for info in pm.seg.regions
    }


def render(img: Image, pm: ParameterMap, cfg: TransferConfig | None = None) -> Image:
    """Apply a parameter map: per-region solves, feathered composition.

    Deterministic for identical (image, map, config).
    """
    if (pm.width, pm.height) != (img.width, img.height):
        raise InvalidArgumentError(
            f"map {pm.width}x{pm.height} does not match image {img.width}x{img.height}"
        )
    cfg = cfg or TransferConfig()
    solutions = solve_strengths(img, pm, cfg)
    sigma = cfg.resolved_feather_sigma(img.width, img.height)
    ffield = feather(pm.seg, sigma)
    values = img.pixels.astype(np.float64) / 255.0
    for attribute in COMPOSITION_ORDER:
        strengths = {rid: sols[attribute].u for rid, sols in solutions.items()}
        if all(u == 0.0 for u in strengths.values()):
            continue
        values = apply_transfer(values, attribute, ffield.blend(strengths))
    return Image(quantize(values))


class ParametricBackend:
    """The built-in deterministic generator."""

    name = "parametric"

    def __init__(self, cfg: TransferConfig | None = None):
        self.cfg = cfg or TransferConfig()

    def render(self, img: Image, pm: ParameterMap) -> Image:
        return render(img, pm, self.cfg)


class RemoteBackend:
    """HTTP generator honoring the render contract: map + PNG in, PNG out.

    Request: POST {base_url}/render with {"version", "image": base64 PNG,
    "map": PMAP JSON}. Response: {"image": base64 PNG}.
    """

    name = "remote"

    def __init__(self, base_url: str, timeout: float = 60.0):
        if not base_url:
            raise InvalidArgumentError("remote backend requires a base URL")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def render(self, img: Image, pm: ParameterMap) -> Image:
        import httpx

        payload = {
            "version": "pertouch/1",
            "image": base64.b64encode(img.png_bytes()).decode("ascii"),
            "map": encode_pmap(pm),
        }
        response = httpx.post(f"{self.base_url}/render", json=payload, timeout=self.timeout)
        response.raise_for_status()
        body = response.json()
        if "image" not in body:
            raise FormatError("remote generator response lacks an image")
        return Image.from_png_bytes(base64.b64decode(body["image"]))


def get_backend(name: str, *, url: str | None = None, cfg: TransferConfig | None = None):
    """Select a generator backend by name ("parametric" or "remote")."""
    if name == "parametric":
        return ParametricBackend(cfg)
    if name == "remote":
        if url is None:
            raise InvalidArgumentError("remote backend requires url=...")
        return RemoteBackend(url)
    raise InvalidArgumentError(f"unknown backend {name!r}")
