"""Deterministic seed splitting.

Every sampler in the package draws from a counter-based Philox generator whose
key is ``root_seed XOR stream_index``.  Distinct stream indices therefore give
independent streams, and the same (seed, index) pair always reproduces the
same draws, on any platform.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# fixed stream offsets so that different kinds of draws never collide even
# when they share a replicate index
STREAM_MEASURE = 0x1000_0000_0000_0001
STREAM_DATA = 0x2000_0000_0000_0002
STREAM_CLOUD = 0x3000_0000_0000_0003
STREAM_TEST = 0x4000_0000_0000_0004
STREAM_FEATURES = 0x5000_0000_0000_0005


def split_seed(root_seed: int, index: int = 0) -> int:
    """Derive a child seed from a root seed and a stream index."""
    return (int(root_seed) ^ int(index)) & _MASK64


def generator(root_seed: int, index: int = 0) -> np.random.Generator:
    """Philox generator for the stream ``root_seed XOR index``."""
    return np.random.Generator(np.random.Philox(key=split_seed(root_seed, index)))
