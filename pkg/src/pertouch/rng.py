"""Seedable PRNG helpers.

Every randomized operation takes either an integer seed or an already
constructed generator, so callers own the stream and results are
reproducible bit-for-bit. Batch work splits one root seed into
independent per-item streams so serial and parallel execution agree.
"""

from __future__ import annotations

import numpy as np


def make_rng(rng: int | np.random.Generator) -> np.random.Generator:
    """Return a PCG64 generator; integers are treated as seeds."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def split_rng(seed: int, count: int) -> list[np.random.Generator]:
    """Derive ``count`` independent child generators from one seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(c) for c in children]
