"""Deterministic seed derivation.

Every random draw in the package comes from a Philox generator keyed by
``(master_seed, role, index...)``. Sub-seeds are derived by hashing through
``numpy.random.SeedSequence`` so replication ``i`` never depends on how many
draws replication ``i - 1`` consumed, and results do not depend on the order
or the process in which tasks run.
"""

from __future__ import annotations

import numpy as np

# Seed-domain tags. Streams with different tags are statistically independent.
FORWARD = 1
REVERSED = 2
INITIAL = 3
ZETA = 4
ZETA_STAR = 5
REDRAW = 6
COVARIANCE = 7
THEORY_CHECK = 8

_MASK64 = (1 << 64) - 1


def generator(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for ``seed`` in the sub-domain named by ``keys``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit integer seed for the sub-domain ``keys`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
