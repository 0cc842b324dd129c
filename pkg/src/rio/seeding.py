"""Named, independent random streams derived from one experiment seed.

Every stochastic component (parameter init, epoch shuffling, rotation
angles, sensor noise) pulls its own generator keyed by (seed, name), so
disabling one component never perturbs the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Generator for the sub-stream `name` of experiment `seed`.

    Deterministic across runs and platforms: the stream key is the CRC32
    of the name, mixed into a SeedSequence spawn key.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(key,)))
