"""Seedable, splittable random streams.

A stream is a :class:`numpy.random.Generator` whose state is a pure function
of ``(master_seed, key...)``.  Replications derive their own stream instead
of sharing one, so results do not depend on how work is scheduled.
"""

from __future__ import annotations

import zlib

import numpy as np

RngStream = np.random.Generator


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key integers must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(master_seed: int, *key) -> RngStream:
    """Return the generator for ``(master_seed, *key)``.

    Key parts may be non-negative integers or strings (hashed with CRC-32).
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))
