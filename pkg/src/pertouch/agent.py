"""Editing sessions: preference memory, weak and strong edit paths.

A weak command starts from the neutral midpoint, asks the memory bank
for scene-conditioned preference deltas, and applies them on top of the
measured scores. A strong command writes an explicit target into the
designated region, then runs a damped feedback loop: render, re-score,
nudge the control entry by a fraction of the residual, repeat until the
output matches the intent or the entry pins at a clamp.

Confirmed edits are persisted as (scene tags, score deltas) records;
deltas rather than absolute targets, because a preferred absolute score
in one scene is meaningless in another.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError, NotFoundError, StorageError
from .imagecore import Image
from .instruction import (
    AbsoluteTarget,
    MagnitudeTable,
    StrongInstruction,
    to_target_delta,
)
from .parammap import ParameterMap, build_map
from .retouch import ParametricBackend
from .rng import make_rng
from .scoring import ATTRIBUTES, AttributeVector, score_image, score_pixels
from .segmentation import SegmentationMap

BRIGHTNESS_TAG_THRESHOLD = 0.2
TEMPERATURE_TAG_THRESHOLD = 0.15


def _clamp(value: float) -> float:
    return max(-1.0, min(1.0, value))


def extract_scene_tags(img: Image, extra_tags: tuple[str, ...] = ()) -> frozenset[str]:
    """Coarse scene tags from whole-image scores, plus caller-supplied ones."""
    scores = score_image(img)
    tags = set()
    if scores.brightness > BRIGHTNESS_TAG_THRESHOLD:
        tags.add("bright")
    elif scores.brightness < -BRIGHTNESS_TAG_THRESHOLD:
        tags.add("dark")
    else:
        tags.add("midtone")
    if scores.temperature > TEMPERATURE_TAG_THRESHOLD:
        tags.add("warm")
    elif scores.temperature < -TEMPERATURE_TAG_THRESHOLD:
        tags.add("cool")
    else:
        tags.add("neutral")
    tags.add("colorful" if scores.colorfulness > 0 else "muted")
    tags.update(str(t).lower() for t in extra_tags if str(t))
    return frozenset(tags)


@dataclass(frozen=True)
class MemoryRecord:
    """One confirmed edit: when, what scene, which deltas, what scope."""

    ts: str
    tags: frozenset[str]
    scores: AttributeVector
    scope: str | None = None  # None is global, otherwise a region label

    def __post_init__(self):
        if not self.tags:
            raise InvalidArgumentError("memory record needs at least one tag")
        if any(not t or t != t.lower() for t in self.tags):
            raise InvalidArgumentError("tags must be non-empty lowercase strings")

    def to_json(self) -> dict:
        return {
            "ts": self.ts,
            "tags": sorted(self.tags),
            "scores": self.scores.to_dict(),
            "scope": "global" if self.scope is None else {"region": self.scope},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MemoryRecord":
        try:
            scope_doc = doc["scope"]
            if scope_doc == "global":
                scope = None
            elif isinstance(scope_doc, dict) and "region" in scope_doc:
                scope = str(scope_doc["region"])
            else:
                raise FormatError(f"malformed scope {scope_doc!r}")
            return cls(
                ts=str(doc["ts"]),
                tags=frozenset(str(t) for t in doc["tags"]),
                scores=AttributeVector.from_dict(doc["scores"]),
                scope=scope,
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed memory record: {exc}") from exc
        except InvalidArgumentError as exc:
            raise FormatError(str(exc)) from exc


class MemoryBank:
    """Append-only JSON Lines record store; the file is the source of truth.

    Appends write-then-fsync before touching the in-memory list, so a
    reloaded bank is always a prefix-consistent view of what callers saw.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[MemoryRecord] = []

    @classmethod
    def load(cls, path: str | Path) -> "MemoryBank":
        bank = cls(path)
        p = Path(path)
        if not p.exists():
            return bank
        with open(p, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                bank.records.append(MemoryRecord.from_json(doc))
        return bank

    def append(self, record: MemoryRecord) -> None:
        if self.path is not None:
            try:
                line = json.dumps(record.to_json())
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageError(f"cannot persist memory record: {exc}") from exc
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


@dataclass(frozen=True)
class PreferenceEstimate:
    scores: AttributeVector
    support: int  # records with positive tag overlap
    dispersion: tuple[float, float, float, float]  # per-attribute std of matches


def estimate_preference(bank: MemoryBank, query: frozenset[str]) -> PreferenceEstimate:
    """Tag-similarity-weighted mean of global preference records.

    Jaccard overlap weights each global-scope record; zero overlap falls
    back to the plain mean of those records, and an empty history
    returns the neutral midpoint. Region-scoped records never influence
    the global estimate.
    """
    eligible = [r for r in bank.records if r.scope is None]
    if not eligible:
        return PreferenceEstimate(AttributeVector(), 0, (0.0, 0.0, 0.0, 0.0))
    weights = np.array([_jaccard(r.tags, query) for r in eligible], dtype=np.float64)
    values = np.array([r.scores.as_tuple() for r in eligible], dtype=np.float64)
    support = int((weights > 0).sum())
    if weights.sum() > 0:
        mean = weights @ values / weights.sum()
        matched = values[weights > 0]
    else:
        mean = values.mean(axis=0)
        matched = np.empty((0, 4))
    sigma = matched.std(axis=0) if len(matched) > 1 else np.zeros(4)
    mean = np.clip(mean, -1.0, 1.0)
    return PreferenceEstimate(
        AttributeVector(*[float(v) for v in mean]),
        support,
        tuple(float(s) for s in sigma),
    )


def sample_preference(
    estimate: PreferenceEstimate,
    mode: str = "mean",
    rng: int | np.random.Generator = 0,
) -> AttributeVector:
    """Draw one preference vector from the estimate."""
    if mode == "mean":
        return estimate.scores
    if mode == "gaussian":
        gen = make_rng(rng)
        noisy = np.array(estimate.scores.as_tuple()) + gen.normal(
            0.0, estimate.dispersion, size=4
        )
        return AttributeVector(*[float(v) for v in np.clip(noisy, -1.0, 1.0)])
    raise InvalidArgumentError(f"unknown sampling mode {mode!r}")


@dataclass(frozen=True)
class RethinkConfig:
    """Feedback-loop knobs: round budget, stop tolerance, damping gain."""

    max_rounds: int = 8
    tolerance: float = 0.05
    gain: float = 0.5

    def __post_init__(self):
        if self.max_rounds < 1:
            raise InvalidArgumentError("max_rounds must be at least 1")
        if self.tolerance <= 0:
            raise InvalidArgumentError("tolerance must be positive")
        if not 0 < self.gain <= 1:
            raise InvalidArgumentError("gain must lie in (0, 1]")


@dataclass(frozen=True)
class EditResult:
    map: ParameterMap
    output: Image
    rounds: int
    saturated: bool
    residual: float
    tags: frozenset[str]


def _preference_map(
    measured: ParameterMap, preference: AttributeVector
) -> ParameterMap:
    """Measured scores shifted by the preference deltas, clamped."""
    shifted = {}
    for rid, vec in measured.scores.items():
        shifted[rid] = AttributeVector(
            *[
                _clamp(m + d)
                for m, d in zip(vec.as_tuple(), preference.as_tuple())
            ]
        )
    return ParameterMap(measured.seg, shifted)


def weak_edit(
    img: Image,
    seg: SegmentationMap,
    bank: MemoryBank,
    *,
    measured: ParameterMap | None = None,
    mode: str = "mean",
    rng: int | np.random.Generator = 0,
    backend=None,
    extra_tags: tuple[str, ...] = (),
) -> EditResult:
    """Automatic pass: memory-derived deltas over the measured scores."""
    backend = backend or ParametricBackend()
    tags = extract_scene_tags(img, extra_tags)
    measured = measured or build_map(img, seg)
    preference = sample_preference(estimate_preference(bank, tags), mode, rng)
    pm = _preference_map(measured, preference)
    return EditResult(pm, backend.render(img, pm), 1, False, 0.0, tags)


def _scope_score(img: Image, seg: SegmentationMap, region: int | None, attribute: str) -> float:
    if region is None:
        return score_image(img).get(attribute)
    return score_pixels(img.pixels[seg.mask(region)]).get(attribute)


def _pinned(pm: ParameterMap, region: int | None, attribute: str, direction: float) -> bool:
    bound = 1.0 if direction > 0 else -1.0
    ids = [region] if region is not None else [info.id for info in pm.seg.regions]
    return all(pm.scores[rid].get(attribute) == bound for rid in ids)


def _adjust(
    pm: ParameterMap, region: int | None, attribute: str, delta: float
) -> ParameterMap:
    updated = dict(pm.scores)
    ids = [region] if region is not None else list(updated)
    for rid in ids:
        vec = updated[rid]
        updated[rid] = vec.with_value(attribute, _clamp(vec.get(attribute) + delta))
    return ParameterMap(pm.seg, updated)


def targeted_edit(
    img: Image,
    seg: SegmentationMap,
    bank: MemoryBank,
    region: int | None,
    attribute: str,
    raw_target: float,
    cfg: RethinkConfig | None = None,
    *,
    measured: ParameterMap | None = None,
    mode: str = "mean",
    rng: int | np.random.Generator = 0,
    backend=None,
    extra_tags: tuple[str, ...] = (),
) -> EditResult:
    """Feedback loop driving one attribute of one scope to a target score.

    ``region`` None means the whole image. ``raw_target`` may exceed
    [-1, 1]; it is clamped and the excess marks the edit saturated. The
    designated entry starts at the target; every other entry keeps its
    weak-path value. Each round renders, re-scores the designated scope
    on the output, and moves the control entry by gain times the
    residual until the output is within tolerance, the round budget runs
    out, or the entry pins at a clamp without progress.
    """
    cfg = cfg or RethinkConfig()
    backend = backend or ParametricBackend()
    tags = extract_scene_tags(img, extra_tags)
    measured = measured or build_map(img, seg)
    if region is not None:
        seg.region(region)

    target = _clamp(raw_target)
    saturated = raw_target != target

    preference = sample_preference(estimate_preference(bank, tags), mode, rng)
    pm = _preference_map(measured, preference)
    # First control estimate: write the target into the designated scope
    # (a uniform shift of every entry for the global scope).
    if region is None:
        measured_score = score_image(img).get(attribute)
        pm = _adjust(pm, None, attribute, target - measured_score)
    else:
        updated = dict(pm.scores)
        updated[region] = updated[region].with_value(attribute, target)
        pm = ParameterMap(pm.seg, updated)

    output = img
    rounds = 0
    residual = math.inf
    prev_abs = None
    stagnant = 0
    for t in range(1, cfg.max_rounds + 1):
        output = backend.render(img, pm)
        rounds = t
        achieved = _scope_score(output, seg, region, attribute)
        residual = target - achieved
        if abs(residual) <= cfg.tolerance:
            break
        if t == cfg.max_rounds:
            break
        if _pinned(pm, region, attribute, residual):
            if prev_abs is not None and abs(residual) >= prev_abs - 1e-9:
                stagnant += 1
                if stagnant >= 2:
                    saturated = True
                    break
            else:
                stagnant = 0
        else:
            stagnant = 0
        prev_abs = abs(residual)
        pm = _adjust(pm, region, attribute, cfg.gain * residual)
    return EditResult(pm, output, rounds, saturated, residual, tags)


def strong_edit(
    img: Image,
    seg: SegmentationMap,
    bank: MemoryBank,
    instr: StrongInstruction,
    cfg: RethinkConfig | None = None,
    *,
    table: MagnitudeTable | None = None,
    measured: ParameterMap | None = None,
    mode: str = "mean",
    rng: int | np.random.Generator = 0,
    backend=None,
    extra_tags: tuple[str, ...] = (),
) -> EditResult:
    """Resolve a strong instruction and run the feedback loop for it."""
    measured = measured or build_map(img, seg)
    region: int | None = None
    if instr.target is not None:
        region = seg.find_label(instr.target)
        if region is None:
            labels = sorted(info.label for info in seg.regions)
            raise NotFoundError(
                f"no region labeled {instr.target!r}; available labels: {labels}"
            )
    spec = to_target_delta(instr, table)
    if isinstance(spec, AbsoluteTarget):
        raw_target = spec.value
    else:
        if region is None:
            raw_target = score_image(img).get(instr.attribute) + spec.value
        else:
            raw_target = measured.scores[region].get(instr.attribute) + spec.value
    return targeted_edit(
        img,
        seg,
        bank,
        region,
        instr.attribute,
        raw_target,
        cfg,
        measured=measured,
        mode=mode,
        rng=rng,
        backend=backend,
        extra_tags=extra_tags,
    )


def confirm(
    bank: MemoryBank,
    tags: frozenset[str],
    final_map: ParameterMap,
    measured: ParameterMap,
    scope: str | None = None,
    *,
    timestamp: str | None = None,
) -> MemoryBank:
    """Persist the confirmed edit's deltas; returns the same bank.

    Global scope stores the area-weighted mean of per-region
    (target - measured) deltas; region scope stores that region's delta.
    """
    if set(final_map.scores) != set(measured.scores):
        raise InvalidArgumentError("final and measured maps cover different regions")
    if scope is None:
        total = sum(info.area for info in final_map.seg.regions)
        acc = np.zeros(4)
        for info in final_map.seg.regions:
            delta = np.array(final_map.scores[info.id].as_tuple()) - np.array(
                measured.scores[info.id].as_tuple()
            )
            acc += info.area * delta
        deltas = acc / total
    else:
        rid = final_map.seg.find_label(scope)
        if rid is None:
            raise NotFoundError(f"no region labeled {scope!r}")
        deltas = np.array(final_map.scores[rid].as_tuple()) - np.array(
            measured.scores[rid].as_tuple()
        )
    ts = timestamp or datetime.now(timezone.utc).isoformat()
    record = MemoryRecord(
        ts=ts,
        tags=tags,
        scores=AttributeVector(*[_clamp(float(d)) for d in deltas]),
        scope=scope,
    )
    bank.append(record)
    return bank
