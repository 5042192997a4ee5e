"""Seeded, splittable random streams.

Every random draw in the package goes through :func:`substream`, which keys a
counter-based Philox generator by ``(seed, *keys)``.  Two calls with the same
keys produce the same stream no matter which process or in which order they
run, so parallel work partitioned by task index is reproducible.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError(f"substream keys must be non-negative, got {k}")
    return k


def substream(seed, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; keys are ints or strings."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *keys) -> int:
    """A 64-bit integer seed derived deterministically from ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
