"""Reproducible random streams.

Every stochastic routine takes an integer seed and derives its generator
from ``(seed, *stream)`` so replicas and chunks get disjoint streams that do
not depend on how work is scheduled across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameter


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and an optional stream path."""
    if seed is None:
        raise InvalidParameter("a seed is required for stochastic computations")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))
