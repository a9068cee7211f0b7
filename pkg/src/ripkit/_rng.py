"""Counter-based random streams keyed by (seed, *path)."""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, *path)``.

    Streams for distinct paths are statistically independent and do not depend
    on the order in which they are created, so work split across threads is
    reproducible regardless of scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
