"""Training-pair preparation: semantic replacement and map perturbation.

Pairs are (input image, parameter map, target image) triples kept
self-consistent by regenerating the target through the reference
parametric generator whenever a map is manipulated. Replacement swaps
one area-sampled region's scores with the most attribute-distant donor
region from the rest of the batch; perturbation jitters and blurs the
rasterized channels so region boundaries act as soft guidance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .imagecore import Image, blur_values
from .parammap import ParameterMap, ChannelRaster, build_map, rasterize_channel
from .retouch import TransferConfig, render
from .rng import make_rng, split_rng
from .scoring import ATTRIBUTES, AttributeVector, RegionScores
from .segmentation import SegmentationMap, sample_region_by_area


@dataclass(frozen=True)
class AugmentConfig:
    replacement_probability: float = 0.1
    jitter_amplitude: float = 0.05
    blur_sigma_range: tuple[float, float] = (1.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.replacement_probability <= 1.0:
            raise InvalidArgumentError("replacement probability must lie in [0, 1]")
        if self.jitter_amplitude < 0:
            raise InvalidArgumentError("jitter amplitude must be non-negative")
        lo, hi = self.blur_sigma_range
        if not 0 < lo <= hi:
            raise InvalidArgumentError("blur sigma range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class TrainingPair:
    input: Image
    map: ParameterMap
    target: Image


def most_divergent_region(src: AttributeVector, donors: list[RegionScores]) -> int:
    """Donor region id with maximal Euclidean score distance from ``src``.

    Ties break toward the lowest region id.
    """
    if not donors:
        raise InvalidArgumentError("donor list is empty")
    best_id, best_dist = None, -1.0
    for donor in sorted(donors, key=lambda d: d.region_id):
        dist = src.distance(donor.scores)
        if dist > best_dist:
            best_id, best_dist = donor.region_id, dist
    return best_id


def _donor_pool(pool: list[TrainingPair]) -> list[tuple[int, RegionScores]]:
    entries = []
    for idx, pair in enumerate(pool):
        for info in pair.map.seg.regions:
            entries.append((idx, RegionScores(info.id, pair.map.scores[info.id])))
    return entries


def _most_divergent_donor(
    src: AttributeVector, pool: list[TrainingPair]
) -> AttributeVector:
    # Global superlative across every region of every pool sample; ties
    # break toward the earliest sample, then the lowest region id.
    best, best_dist = None, -1.0
    for _, entry in _donor_pool(pool):
        dist = src.distance(entry.scores)
        if dist > best_dist:
            best, best_dist = entry.scores, dist
    return best


def semantic_replace(
    pair: TrainingPair,
    pool: list[TrainingPair],
    cfg: AugmentConfig,
    rng: int | np.random.Generator,
    transfer_cfg: TransferConfig | None = None,
) -> TrainingPair:
    """Maybe swap one region's scores with the most divergent pool donor.

    The region is drawn with area-proportional probability; the target
    image is regenerated so the pair stays self-consistent.
    """
    if not pool:
        raise InvalidArgumentError("donor pool is empty")
    gen = make_rng(rng)
    if gen.random() >= cfg.replacement_probability:
        return pair
    region = sample_region_by_area(pair.map.seg, gen)
    donor_scores = _most_divergent_donor(pair.map.scores[region], pool)
    updated = dict(pair.map.scores)
    updated[region] = donor_scores
    new_map = ParameterMap(pair.map.seg, updated)
    return TrainingPair(pair.input, new_map, render(pair.input, new_map, transfer_cfg))


def perturb_map(
    pm: ParameterMap, cfg: AugmentConfig, rng: int | np.random.Generator
) -> list[ChannelRaster]:
    """Rasterize all channels, shift each by one scalar offset, blur, clamp.

    The per-channel offset decouples scores from exact segmentation
    values; the blur softens boundaries. Deterministic given the seed.
    """
    gen = make_rng(rng)
    rasters = []
    for k in range(len(ATTRIBUTES)):
        values = rasterize_channel(pm, k).values
        offset = gen.uniform(-cfg.jitter_amplitude, cfg.jitter_amplitude)
        sigma = gen.uniform(cfg.blur_sigma_range[0], cfg.blur_sigma_range[1])
        jittered = np.clip(values + offset, -1.0, 1.0)
        rasters.append(ChannelRaster(np.clip(blur_values(jittered, sigma), -1.0, 1.0)))
    return rasters


@dataclass(frozen=True)
class DatasetSample:
    pair: TrainingPair
    perturbed_channels: list[ChannelRaster]


def prepare_dataset(
    inputs: list[tuple[Image, SegmentationMap]],
    cfg: AugmentConfig,
    transfer_cfg: TransferConfig | None = None,
) -> list[DatasetSample]:
    """Build self-consistent training pairs for a batch.

    Per sample: measure a map, run the replacement gate against the rest
    of the batch, regenerate the target, and emit perturbed channel
    rasters. The PRNG is split per sample index, so processing order
    cannot change results.
    """
    if not inputs:
        return []
    for idx, (img, seg) in enumerate(inputs):
        if (seg.width, seg.height) != (img.width, img.height):
            raise InvalidArgumentError(f"sample {idx}: mask does not match image dimensions")
    base_pairs = []
    for idx, (img, seg) in enumerate(inputs):
        pm = build_map(img, seg)
        base_pairs.append(TrainingPair(img, pm, render(img, pm, transfer_cfg)))
    streams = split_rng(cfg.seed, len(inputs))
    samples = []
    for idx, pair in enumerate(base_pairs):
        gen = streams[idx]
        pool = base_pairs[:idx] + base_pairs[idx + 1 :]
        if pool:
            pair = semantic_replace(pair, pool, cfg, gen, transfer_cfg)
        samples.append(DatasetSample(pair, perturb_map(pair.map, cfg, gen)))
    return samples
