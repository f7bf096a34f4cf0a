"""Seed derivation.

Every random draw in the package comes from a generator keyed by a root seed
plus a tuple of integer/string keys, so that e.g. the noise column ``j`` or
the tree ``b`` is fixed by ``(seed, j)`` / ``(seed, b)`` no matter in which
order (or in which process) it is produced.
"""
from __future__ import annotations

import zlib

import numpy as np

Key = int | str


def _as_int(key: Key) -> int:
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("boolean seed keys are ambiguous")
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    key = int(key)
    if key < 0:
        raise ValueError(f"seed keys must be nonnegative, got {key}")
    return key


def seed_sequence(seed: int, *keys: Key) -> np.random.SeedSequence:
    if int(seed) < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_as_int(k) for k in keys))


def rng(seed: int, *keys: Key) -> np.random.Generator:
    """Independent generator for the stream named by ``keys`` under ``seed``."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys: Key) -> int:
    """A 31-bit integer seed for the named stream (fits numba's legacy seeding)."""
    state = seed_sequence(seed, *keys).generate_state(1, np.uint32)[0]
    return int(state) & 0x7FFFFFFF
