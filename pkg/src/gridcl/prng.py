"""Deterministic random-number primitives used throughout the harness.

All randomness flows through PCG32 streams, and child seeds are derived
with a splitmix64-based mix, so a run replays bit-exactly from its master
seed on any platform or implementation.
"""

from __future__ import annotations

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
MASK32 = 0xFFFF_FFFF

_GOLDEN = 0x9E3779B97F4A7C15
_PCG_MULT = 6364136223846793005


def splitmix64(seed: int) -> int:
    """First output of the splitmix64 stream seeded with ``seed``."""
    z = (seed + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def split_seed(parent: int, index: int) -> int:
    """Derive the ``index``-th child seed from ``parent``.

    Used everywhere one seed fans out into many (lifetimes, agents,
    environment slots) so sibling streams never share state.
    """
    return splitmix64((parent ^ ((index * _GOLDEN) & MASK64)) & MASK64)


class Pcg32:
    """PCG32 (XSH-RR) generator: 64-bit LCG state, 32-bit outputs.

    State advances by ``state * 6364136223846793005 + inc`` where the
    increment is ``(initseq << 1) | 1`` (always odd; 1 for the default
    stream). Seeding follows the reference pcg32_srandom sequence so
    outputs match other conforming implementations bit for bit.
    """

    __slots__ = ("state", "inc")

    def __init__(self, initstate: int, initseq: int = 0) -> None:
        self.state = 0
        self.inc = ((initseq << 1) | 1) & MASK64
        self.next_u32()
        self.state = (self.state + initstate) & MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _PCG_MULT + self.inc) & MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & MASK32

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` without modulo bias."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        threshold = (1 << 32) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def unit(self) -> float:
        """Uniform float in ``[0, 1)`` from one 32-bit draw."""
        return self.next_u32() / 4294967296.0

    def choice(self, items):
        return items[self.below(len(items))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates: descending index, swap with below(i + 1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
