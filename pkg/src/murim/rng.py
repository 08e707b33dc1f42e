"""Keyed random streams.

Every random draw in a run is taken from a generator keyed by
``(seed, purpose, *indices)``, so results do not depend on the order in
which clients are processed and parallel execution stays bit-identical.
"""

from __future__ import annotations

import numpy as np

# purpose codes; never renumber, they are part of the reproducibility contract
DATA = 1
SPLIT = 2
PARTITION = 3
POPULATION = 4
TRAIN = 5
DP_NOISE = 6
LATENCY = 7
ATTACK = 8


def derive_seed(seed: int, *keys: int) -> int:
    """Collapse ``(seed, *keys)`` into one 32-bit integer seed."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, keys)])
