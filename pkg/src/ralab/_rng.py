"""Deterministic RNG stream derivation.

Every stochastic routine takes an integer seed and derives independent
substreams from it, so reruns with the same config are bit-identical and
parallel workers never share a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_ints(key) -> tuple[int, ...]:
    """Map an arbitrary hashable-ish key to stable 32-bit words."""
    if isinstance(key, (int, np.integer)):
        return (int(key) & 0xFFFFFFFF, (int(key) >> 32) & 0xFFFFFFFF)
    digest = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return (value & 0xFFFFFFFF, (value >> 32) & 0xFFFFFFFF)


def derive_seed(base_seed: int, *keys) -> np.random.SeedSequence:
    """Derive a child SeedSequence from a base seed and unit keys."""
    spawn_key: list[int] = []
    for key in keys:
        spawn_key.extend(_key_to_ints(key))
    return np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(spawn_key))


def rng_from(base_seed: int, *keys) -> np.random.Generator:
    """PCG64 generator on the derived substream."""
    return np.random.Generator(np.random.PCG64(derive_seed(base_seed, *keys)))
