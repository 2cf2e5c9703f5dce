"""Seed management for reproducible, parallel-safe random streams.

Every random draw in the package flows through an RngHandle.  Handles with
equal (master_seed, stream_id) produce identical draws; distinct stream_ids
give statistically independent streams (numpy SeedSequence spawning).
Substreams may additionally be keyed by tuples of ints/strings so that
replications, corruption levels, and algorithm variants can share or split
randomness deliberately (common random numbers).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        # crc32 is stable across platforms and python versions
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported stream key type: {type(key)!r}")


@dataclass(frozen=True)
class RngHandle:
    """A reproducible pointer into the random-number space.

    master_seed: 64-bit integer chosen by the caller.
    stream_id: non-negative integer separating independent top-level streams.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        """Fresh Generator for this (master_seed, stream_id)."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(seq)

    def substream(self, *keys) -> np.random.Generator:
        """Generator keyed by (stream_id, *keys); str keys are crc32-hashed."""
        spawn = (self.stream_id,) + tuple(_key_to_int(k) for k in keys)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=spawn)
        return np.random.default_rng(seq)

    def child(self, key) -> "RngHandle":
        """Handle for a derived top-level stream."""
        return RngHandle(self.master_seed, _key_to_int(key))
