"""Platform-independent random streams for probe generation.

Each probe draws from its own SplitMix64 stream. The stream's starting state is
the first eight bytes (big-endian) of the SHA-256 digest of a canonical key
string built from the probe's identifying fields, so any implementation that
reproduces the key string and SplitMix64 reproduces every probe exactly.
Bounded integers use rejection sampling on the raw 64-bit outputs.
"""
from __future__ import annotations

import hashlib

RNG_ALGORITHM = "splitmix64/sha256-key/v1"

_MASK = (1 << 64) - 1


def stream_seed(key: str) -> int:
    """Map a canonical key string to a 64-bit starting state."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood constants)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    @classmethod
    def from_key(cls, key: str) -> "SplitMix64":
        return cls(stream_seed(key))

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed interval [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            v = self.next_u64()
            if v < limit:
                return lo + v % span

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]

    def coin(self) -> bool:
        return self.randint(0, 1) == 1
