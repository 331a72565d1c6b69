"""
Seeded random streams.
Every consumer asks for a stream by (seed, purpose, index); streams for
different purposes are statistically independent, so e.g. changing the
initialization does not perturb the generated game.
"""
from __future__ import annotations
import zlib

import numpy as np

from app.errors import ParameterError

U64_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) <= U64_MAX:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    key = (zlib.crc32(purpose.encode("utf-8")), int(index))
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))
