"""Seeded random streams and the stable hash used for dataset splits."""

import numpy as np

RNG_NAME = "numpy.PCG64"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def make_rng(seed, *stream):
    """Return a PCG64 generator for ``seed``, optionally keyed by extra stream ids.

    ``make_rng(7, 1, 3)`` and ``make_rng(7, 1, 4)`` are independent streams,
    which is how callers split one run seed into per-purpose generators.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def derive_seed(seed, *stream):
    """A 64-bit child seed, stable across platforms."""
    state = np.random.SeedSequence([int(seed), *map(int, stream)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h
