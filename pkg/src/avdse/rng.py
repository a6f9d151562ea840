"""Named random sub-streams derived from a single run seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``name`` (e.g. "jitter", "strategy") under ``seed``.

    The stream name is hashed with crc32 so the mapping is stable across
    interpreter runs (``hash()`` is salted).
    """
    entropy = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    entropy.extend(int(k) & 0xFFFFFFFF for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))
