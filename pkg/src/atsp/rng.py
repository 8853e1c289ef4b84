"""Seeded, counter-based random streams.

All randomness in the package flows through one master seed. Substreams are
derived by hashing a text label (FNV-1a, 64-bit) into the spawn key of a
``numpy.random.SeedSequence`` that feeds a Philox counter-based generator.
The resulting streams are independent of thread count and stable across
runs: the same ``(seed, label)`` pair always yields the same stream.

Gaussian variates come from ``Generator.standard_normal`` (ziggurat); that
choice is fixed so that byte-level reproducibility holds everywhere.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash (process-independent, unlike builtin ``hash``)."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_seed(seed: int, label: str) -> int:
    """Mix a master seed with a stage label into a fresh 64-bit seed."""
    h = fnv1a64((seed & _MASK64).to_bytes(8, "little"))
    h ^= fnv1a64(label.encode("utf-8"))
    h = (h * _FNV_PRIME) & _MASK64
    return h


def substream(seed: int, label: str) -> np.random.Generator:
    """Return the Philox generator for stage ``label`` under ``seed``."""
    ss = np.random.SeedSequence(
        entropy=seed & _MASK64, spawn_key=(fnv1a64(label.encode("utf-8")),)
    )
    return np.random.Generator(np.random.Philox(ss))
