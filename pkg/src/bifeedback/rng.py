"""SplitMix64: a small 64-bit generator with its whole state in one integer.

Every random draw in the package goes through this class so that a run is
reproducible from its integer seeds alone, independent of the Python
version or of any global random state.
"""
from __future__ import annotations

from dataclasses import dataclass

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """The SplitMix64 output finalizer (Stafford variant 13)."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash a tuple of integers into one 64-bit seed (used for substreams)."""
    h = 0
    for p in parts:
        h = mix64((h + GOLDEN_GAMMA + (p & MASK64)) & MASK64)
    return h


@dataclass
class SplitMix64:
    state: int = 0

    def __post_init__(self) -> None:
        self.state &= MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) % n
        while True:
            x = self.next_u64()
            if x >= threshold:
                return x % n

    def categorical(self, probs) -> int:
        u = self.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return len(probs) - 1

    def spawn(self, *parts: int) -> "SplitMix64":
        """Independent child stream; does not advance this generator."""
        return SplitMix64(derive_seed(self.state, *parts))
