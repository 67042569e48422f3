"""Counter-based random substreams.

Every substream is a Philox generator keyed by ``SeedSequence(seed,
spawn_key=key)``, so a replicate's draws depend only on (seed, key) and never
on scheduling. Normals come from the inverse CDF of open-interval uniforms, a
fixed transform with no rejection step.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_SCALE = 2.0**-53


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uniforms(gen: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    bits = gen.integers(0, 2**53, size=size, dtype=np.int64)
    return (bits + 0.5) * _SCALE


def normals(gen: np.random.Generator, size) -> np.ndarray:
    return ndtri(uniforms(gen, size))
