"""Counter-based random streams.

Every random number used by the engines is a pure function of
``(master seed, trial, purpose, stream, index)``: the seed forms the Philox
key and the remaining four integers form the counter. No generator state is
carried between draws, so results do not depend on execution order or on
how trials are split across workers.

Vectorised analysis code that only needs a NumPy ``Generator`` derives one
from the same seed via :func:`generator`.
"""

from __future__ import annotations

import numpy as np

from glfield import _kernels as kern

PURPOSES = {
    "init": kern.P_INIT,
    "exp": kern.P_EXP,
    "route": kern.P_ROUTE,
    "arrival": kern.P_ARRIVAL,
    "attr": kern.P_ATTR,
}


def seed_key(seed: int) -> tuple[int, int]:
    """Split a non-negative 64-bit seed into the two Philox key words."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def philox4x32(counter, key) -> tuple[int, int, int, int]:
    """Raw Philox4x32-10 block for a 4-word counter and 2-word key."""
    out = kern.philox4x32(*(np.uint64(c) for c in counter), *(np.uint64(k) for k in key))
    return tuple(int(v) for v in out)


def uniforms(seed: int, trial: int, purpose: str, stream: int, n: int) -> np.ndarray:
    """First ``n`` uniforms on (0, 1) of one stream; mostly for inspection."""
    k0, k1 = seed_key(seed)
    code = PURPOSES[purpose]
    return np.array([kern.uniform(k0, k1, trial, code, stream, i) for i in range(n)])


def generator(seed: int, *words: int) -> np.random.Generator:
    """NumPy generator for a named substream ``(seed, *words)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, words)])))
