"""Seeded random substreams.

Every generation stage draws from its own counter-based stream, keyed by a
stage name, so extra draws in one stage never shift another stage's values.
"""

from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, name, *extra)``."""
    key = (zlib.crc32(name.encode("ascii")),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, name: str, *extra: int) -> int:
    """Derive a child 64-bit seed, e.g. per-problem seeds from a split seed."""
    key = (zlib.crc32(name.encode("ascii")),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=key)
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
