"""Deterministic randomness: 64-bit seed derivation and per-episode sources.

Episodes get an ``EpisodeRng`` built from a single integer seed. It exposes a
sequential uniform stream (for policies that draw once per round) and keyed
substreams (for the multi-copy master, whose copies must see reproducible
draws regardless of evaluation order).
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """One round of the splitmix64 mixer over a 64-bit state."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def hash64(*parts) -> int:
    """Collapse a mixed tuple of ints/floats/strings into a 64-bit seed.

    Used to derive episode and environment seeds so that runs are paired on
    environments across policies while episode randomness stays independent.
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, bool):
            h.update(b"b" + (b"\x01" if p else b"\x00"))
        elif isinstance(p, (int, np.integer)):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, (float, np.floating)):
            h.update(b"f" + struct.pack("<d", float(p)))
        elif isinstance(p, str):
            h.update(b"s" + p.encode("utf-8"))
        else:
            raise TypeError(f"hash64 cannot digest {type(p).__name__}")
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


class EpisodeRng:
    """Randomness owned by one episode; deterministic given its seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.default_rng(self.seed)
        self._keyed_base = splitmix64(self.seed ^ _GOLDEN)

    def uniform(self) -> float:
        """Next value of the sequential uniform stream, in [0, 1)."""
        return float(self._gen.random())

    def keyed_uniform(self, *keys: int) -> float:
        """Uniform in [0, 1) from the substream identified by ``keys``.

        Independent of how many sequential or keyed draws happened before, so
        per-copy draws keyed by (round, copy) reproduce in any order.
        """
        z = self._keyed_base
        for k in keys:
            z = splitmix64(z ^ ((int(k) & _MASK64) * _GOLDEN & _MASK64))
        return (z >> 11) * (2.0**-53)
