"""Multi-channel parameter maps: per-region target scores over a mask.

A map is piecewise-constant by construction, so it is stored sparsely
(one AttributeVector per region) and rasterized on demand. The PMAP
JSON interchange embeds the segmentation RLE so a file is
self-contained for the CLI, the service, and the UI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import FormatError, InvalidArgumentError, NotFoundError
from .imagecore import Image
from .scoring import ATTRIBUTES, AttributeVector, score_region
from .segmentation import (
    SCHEMA_VERSION,
    SegmentationMap,
    _runs_of,
    decode_segmentation,
)

ATTRIBUTE_COUNT = 4


@dataclass(frozen=True)
class ChannelRaster:
    """Dense per-pixel values in [-1, 1] for one attribute channel."""

    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


class ParameterMap:
    """Per-region target scores for all four attributes.

    Value semantics: edits return a new map sharing the segmentation.
    """

    __slots__ = ("_seg", "_scores")

    def __init__(self, seg: SegmentationMap, scores: Mapping[int, AttributeVector]):
        expected = {info.id for info in seg.regions}
        if set(scores) != expected:
            raise InvalidArgumentError(
                f"scores cover regions {sorted(scores)}, segmentation has {sorted(expected)}"
            )
        self._seg = seg
        self._scores = MappingProxyType(dict(scores))

    @property
    def seg(self) -> SegmentationMap:
        return self._seg

    @property
    def scores(self) -> Mapping[int, AttributeVector]:
        return self._scores

    @property
    def width(self) -> int:
        return self._seg.width

    @property
    def height(self) -> int:
        return self._seg.height

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterMap):
            return NotImplemented
        return self._seg == other._seg and dict(self._scores) == dict(other._scores)

    def __repr__(self) -> str:
        return f"ParameterMap({self.width}x{self.height}, {len(self._scores)} regions)"


def build_map(img: Image, seg: SegmentationMap) -> ParameterMap:
    """Measure every region of the image and fuse the scores into a map."""
    if (seg.width, seg.height) != (img.width, img.height):
        raise InvalidArgumentError(
            f"segmentation {seg.width}x{seg.height} does not match image "
            f"{img.width}x{img.height}"
        )
    return ParameterMap(
        seg, {info.id: score_region(img, seg, info.id) for info in seg.regions}
    )


def default_map(seg: SegmentationMap) -> ParameterMap:
    """Midpoint map: every region at the neutral score (0, 0, 0, 0)."""
    return ParameterMap(seg, {info.id: AttributeVector() for info in seg.regions})


def rasterize_channel(pm: ParameterMap, k: int) -> ChannelRaster:
    """Expand channel ``k`` to a dense raster, one value per region."""
    if not 0 <= k < ATTRIBUTE_COUNT:
        raise InvalidArgumentError(f"attribute index {k} outside 0..{ATTRIBUTE_COUNT - 1}")
    attribute = ATTRIBUTES[k]
    lookup = np.array(
        [pm.scores[info.id].get(attribute) for info in pm.seg.regions],
        dtype=np.float64,
    )
    return ChannelRaster(lookup[pm.seg.labels])


def set_region_score(
    pm: ParameterMap, region: int, attribute: str, value: float
) -> ParameterMap:
    """Return a copy of the map with one (region, attribute) cell changed."""
    if attribute not in ATTRIBUTES:
        raise InvalidArgumentError(f"unknown attribute {attribute!r}")
    if not -1.0 <= value <= 1.0:
        raise InvalidArgumentError(f"score {value} outside [-1, 1]")
    if region not in pm.scores:
        raise NotFoundError(f"region {region} not present in this map")
    updated = dict(pm.scores)
    updated[region] = updated[region].with_value(attribute, float(value))
    return ParameterMap(pm.seg, updated)


def encode_pmap(pm: ParameterMap) -> dict:
    """PMAP JSON structure; attribute name order is normative."""
    flat = pm.seg.labels.ravel()
    return {
        "version": SCHEMA_VERSION,
        "width": pm.width,
        "height": pm.height,
        "attributes": list(ATTRIBUTES),
        "regions": [
            {
                "id": info.id,
                "label": info.label,
                "rle": _runs_of(flat, info.id),
                "scores": pm.scores[info.id].to_dict(),
            }
            for info in pm.seg.regions
        ],
    }


def decode_pmap(doc: dict) -> ParameterMap:
    """Parse a PMAP JSON structure back into a map (strict)."""
    if not isinstance(doc, dict):
        raise FormatError("pmap document must be a JSON object")
    version = doc.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise FormatError(f"unsupported pmap schema version {version!r}")
    if doc.get("attributes") != list(ATTRIBUTES):
        raise FormatError(
            f"attribute order must be {list(ATTRIBUTES)}, got {doc.get('attributes')}"
        )
    try:
        width, height = int(doc["width"]), int(doc["height"])
        region_docs = doc["regions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"pmap document missing required field: {exc}") from exc
    seg_doc = {
        "width": width,
        "height": height,
        "regions": [
            {"id": r.get("id"), "label": r.get("label"), "rle": r.get("rle")}
            for r in region_docs
        ],
    }
    seg = decode_segmentation(seg_doc, width, height)
    scores = {}
    for rdoc in region_docs:
        try:
            scores[int(rdoc["id"])] = AttributeVector.from_dict(rdoc["scores"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed region scores: {exc}") from exc
        except InvalidArgumentError as exc:
            raise FormatError(str(exc)) from exc
    return ParameterMap(seg, scores)


def load_pmap(path: str | Path) -> ParameterMap:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return decode_pmap(doc)


def save_pmap(pm: ParameterMap, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(encode_pmap(pm), fh)
        fh.write("\n")
