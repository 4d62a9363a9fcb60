"""Seed derivation helpers.

Every random draw in the package flows through a counter-based Philox
generator keyed by an explicit integer tuple, so any stream (init of one
parameter, shuffle of one epoch) is reproducible in isolation and
independent of evaluation order or worker count.
"""

from __future__ import annotations

import numpy as np


def generator(*key: int) -> np.random.Generator:
    """Philox generator for the given key tuple. Same key, same stream."""
    entropy = [int(k) & 0xFFFFFFFFFFFFFFFF for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
