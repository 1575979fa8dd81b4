"""Derived random streams.

Every source of randomness in a run is a PCG64 generator keyed by the master
seed plus a tuple of tags (stream name, client id, round, step, ...).  Streams
are therefore independent of execution order: two clients, or two schedulings
of the same client, always see the same draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(*parts: int | str) -> int:
    """Collapse a tag tuple into a 128-bit integer, stable across processes."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        tag = f"i{part};" if isinstance(part, int) else f"s{part};"
        h.update(tag.encode("utf-8"))
    return int.from_bytes(h.digest()[:16], "little")


def spawn_rng(*parts: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stable_seed(*parts)))
