"""Keyed random streams.

A stream is identified by the user seed plus a tuple of labels such as
``("sample", "vertical")``.  Labels are mapped to integers with CRC32 so that
the same (seed, labels) pair always yields the same generator, independent of
what else was drawn before.
"""
from __future__ import annotations

import hashlib
import zlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``(seed, *labels)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(x) for x in labels))
    return np.random.default_rng(ss)


def keyed_uniform(seed: int, key) -> float:
    """Counter-style uniform in [0, 1) fixed by ``(seed, key)`` alone."""
    h = hashlib.blake2b(f"{int(seed)}\x1f{key}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(h, "little") / 2.0**64
