"""Panoptic mask ingestion, region geometry, and area-weighted sampling.

Masks are produced upstream (an external segmenter plus whatever
flattening policy it applies) and arrive here as run-length encoded
JSON. This module only validates, decodes, and serves them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .imagecore import Image
from .rng import make_rng

SCHEMA_VERSION = "pertouch/1"

_UNCLAIMED = np.uint32(0xFFFFFFFF)


@dataclass(frozen=True)
class RegionInfo:
    """Geometry summary of one region: id, name, pixel count, tight bbox."""

    id: int
    label: str
    area: int
    bbox: tuple[int, int, int, int]  # (min_x, min_y, max_x, max_y), inclusive


class SegmentationMap:
    """Exhaustive pixel-to-region labeling with per-region metadata.

    Region ids are contiguous from 0; every pixel belongs to exactly one
    region. Immutable after construction.
    """

    __slots__ = ("_labels", "_regions")

    def __init__(self, labels: np.ndarray, names: dict[int, str]):
        arr = np.array(labels, dtype=np.uint32, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError(f"labels must be a non-empty 2-D array, got {arr.shape}")
        present = np.unique(arr)
        n = len(present)
        if present[0] != 0 or present[-1] != n - 1:
            raise FormatError(f"region ids must be contiguous from 0, found {present.tolist()}")
        if set(names) != set(range(n)):
            raise FormatError(
                f"region names must cover ids 0..{n - 1}, got {sorted(names)}"
            )
        arr.flags.writeable = False
        self._labels = arr
        self._regions = tuple(self._region_info(rid, names[rid]) for rid in range(n))

    def _region_info(self, rid: int, label: str) -> RegionInfo:
        ys, xs = np.nonzero(self._labels == rid)
        return RegionInfo(
            id=rid,
            label=label,
            area=int(len(xs)),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
        )

    @property
    def width(self) -> int:
        return self._labels.shape[1]

    @property
    def height(self) -> int:
        return self._labels.shape[0]

    @property
    def labels(self) -> np.ndarray:
        """Read-only (H, W) uint32 region-id array."""
        return self._labels

    @property
    def regions(self) -> tuple[RegionInfo, ...]:
        return self._regions

    def region(self, rid: int) -> RegionInfo:
        if not 0 <= rid < len(self._regions):
            raise InvalidArgumentError(f"region {rid} does not exist")
        return self._regions[rid]

    def mask(self, rid: int) -> np.ndarray:
        """Boolean (H, W) membership mask for one region."""
        self.region(rid)
        return self._labels == rid

    def find_label(self, label: str) -> int | None:
        """Case-insensitive exact label lookup; lowest matching id wins."""
        wanted = label.lower()
        for info in self._regions:
            if info.label.lower() == wanted:
                return info.id
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegmentationMap):
            return NotImplemented
        return self._regions == other._regions and bool(
            np.array_equal(self._labels, other._labels)
        )

    def __repr__(self) -> str:
        return f"SegmentationMap({self.width}x{self.height}, {len(self._regions)} regions)"


def _runs_of(flat_labels: np.ndarray, rid: int) -> list[list[int]]:
    member = flat_labels == rid
    padded = np.concatenate([[False], member, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2]
    return [[int(s), int(e - s)] for s, e in zip(starts, ends)]


def encode_segmentation(seg: SegmentationMap) -> dict:
    """Serialize a map to the RLE JSON structure (runs over row-major index)."""
    flat = seg.labels.ravel()
    return {
        "version": SCHEMA_VERSION,
        "width": seg.width,
        "height": seg.height,
        "regions": [
            {"id": info.id, "label": info.label, "rle": _runs_of(flat, info.id)}
            for info in seg.regions
        ],
    }


def decode_segmentation(doc: dict, width: int, height: int) -> SegmentationMap:
    """Validate and decode the RLE JSON structure.

    Runs must be disjoint and jointly exhaustive; the document's
    dimensions must match the expected ones.
    """
    if not isinstance(doc, dict):
        raise FormatError("segmentation document must be a JSON object")
    version = doc.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise FormatError(f"unsupported segmentation schema version {version!r}")
    try:
        doc_w, doc_h = int(doc["width"]), int(doc["height"])
        region_docs = doc["regions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"segmentation document missing required field: {exc}") from exc
    if (doc_w, doc_h) != (width, height):
        raise InvalidArgumentError(
            f"segmentation is {doc_w}x{doc_h}, expected {width}x{height}"
        )
    total = width * height
    flat = np.full(total, _UNCLAIMED, dtype=np.uint32)
    names: dict[int, str] = {}
    for rdoc in region_docs:
        try:
            rid = int(rdoc["id"])
            label = str(rdoc["label"])
            runs = rdoc["rle"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed region entry: {exc}") from exc
        if rid < 0:
            raise FormatError(f"negative region id {rid}")
        if rid in names:
            raise FormatError(f"duplicate region id {rid}")
        names[rid] = label
        for run in runs:
            if not (isinstance(run, (list, tuple)) and len(run) == 2):
                raise FormatError(f"region {rid}: runs must be [start, length] pairs")
            start, length = int(run[0]), int(run[1])
            if length < 1 or start < 0 or start + length > total:
                raise FormatError(
                    f"region {rid}: run [{start}, {length}] outside 0..{total}"
                )
            span = flat[start : start + length]
            if (span != _UNCLAIMED).any():
                raise FormatError(
                    f"region {rid}: run [{start}, {length}] overlaps another region"
                )
            span[:] = rid
    uncovered = int((flat == _UNCLAIMED).sum())
    if uncovered:
        raise FormatError(f"runs are not exhaustive: {uncovered} pixels unclaimed")
    return SegmentationMap(flat.reshape(height, width), names)


def load_segmentation(path: str | Path, width: int, height: int) -> SegmentationMap:
    """Load the RLE JSON file format produced by the upstream segmenter."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return decode_segmentation(doc, width, height)


def save_segmentation(seg: SegmentationMap, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(encode_segmentation(seg), fh)
        fh.write("\n")


def grid_segmentation(img: Image, rows: int, cols: int) -> SegmentationMap:
    """Near-equal rectangular tiling, the fallback when no mask exists.

    Remainder pixels go to the last row/column of tiles. Labels are
    "cell_r_c", ids assigned row-major.
    """
    h, w = img.height, img.width
    if rows < 1 or cols < 1 or rows > h or cols > w:
        raise InvalidArgumentError(
            f"grid {rows}x{cols} invalid for a {w}x{h} image"
        )
    base_h, base_w = h // rows, w // cols
    labels = np.zeros((h, w), dtype=np.uint32)
    names = {}
    for r in range(rows):
        y0 = r * base_h
        y1 = (r + 1) * base_h if r < rows - 1 else h
        for c in range(cols):
            x0 = c * base_w
            x1 = (c + 1) * base_w if c < cols - 1 else w
            rid = r * cols + c
            labels[y0:y1, x0:x1] = rid
            names[rid] = f"cell_{r}_{c}"
    return SegmentationMap(labels, names)


def sample_region_by_area(
    seg: SegmentationMap, rng: int | np.random.Generator
) -> int:
    """Draw one region id with probability proportional to its pixel area."""
    gen = make_rng(rng)
    areas = np.array([info.area for info in seg.regions], dtype=np.int64)
    cumulative = np.cumsum(areas)
    # Integer draw makes the per-region probability exactly area/total.
    pick = int(gen.integers(0, cumulative[-1]))
    return int(np.searchsorted(cumulative, pick, side="right"))
