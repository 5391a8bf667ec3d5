"""Deterministic fan-out of one master seed into independent child streams.

Every experiment derives child generators from (master seed, key path),
where the key path is a fixed sequence of small integers or labels such as
(stream id, grid cell, instance index). The derivation is counter based, so
results never depend on scheduling order or on how many workers run.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = [
    "spawn_rng",
    "key_to_int",
    "STREAM_LEARN",
    "STREAM_RECOVERY",
    "STREAM_FRESH",
    "STREAM_SWEEP",
    "STREAM_TUNING",
    "STREAM_BARRIER",
]

# stream ids keeping the experiment families on disjoint child streams
STREAM_LEARN = 1
STREAM_RECOVERY = 2
STREAM_FRESH = 3
STREAM_SWEEP = 4
STREAM_TUNING = 5
STREAM_BARRIER = 6


def key_to_int(key) -> int:
    """Map a key (int or label string) to a stable non-negative integer."""
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")
    raise TypeError(f"seed keys must be int or str, got {type(key).__name__}")


def spawn_rng(master_seed: int, *keys) -> np.random.Generator:
    """Child generator for the given key path under the master seed."""
    entropy = [key_to_int(master_seed)] + [key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
