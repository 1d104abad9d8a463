"""Bloom filter used both for membership tests and as a feature-key encoder.

Indices are derived by double hashing, ``index_j = (h1 + j*h2) mod z`` for
``j = 0..q-1``, where ``h1`` and ``h2`` are two independently seeded 64-bit
hashes of the element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hashing import BLOOM_SEED1, BLOOM_SEED2, hash64

ENCODED_PREFIX = "B:"


@dataclass(frozen=True)
class BloomConfig:
    enabled: bool = False
    bits: int = 999
    hashes: int = 3
    seed1: int = BLOOM_SEED1
    seed2: int = BLOOM_SEED2

    def __post_init__(self):
        if self.bits < 1 or self.hashes < 1:
            raise ValueError(f"bloom needs bits >= 1 and hashes >= 1, got {self.bits}, {self.hashes}")
        if self.seed1 == self.seed2:
            raise ValueError("bloom seeds must differ")


def _as_bytes(element) -> bytes:
    return element.encode("utf-8") if isinstance(element, str) else bytes(element)


def hash_indices(element: bytes, z: int, q: int, seed1: int = BLOOM_SEED1, seed2: int = BLOOM_SEED2) -> list[int]:
    """The q raw bit positions of ``element`` (duplicates possible)."""
    h1 = hash64(element, seed1)
    h2 = hash64(element, seed2)
    return [(h1 + j * h2) % z for j in range(q)]


def encode_key(element, z: int = 999, q: int = 3, seed1: int = BLOOM_SEED1, seed2: int = BLOOM_SEED2) -> tuple[int, ...]:
    """Deduplicated, ascending bit positions standing in for ``element``."""
    return tuple(sorted(set(hash_indices(_as_bytes(element), z, q, seed1, seed2))))


def format_encoded(indices) -> str:
    return ENCODED_PREFIX + ",".join(map(str, indices))


def parse_encoded(text: str) -> tuple[int, ...]:
    if not text.startswith(ENCODED_PREFIX):
        raise ValueError(f"not an encoded key: {text!r}")
    return tuple(int(part) for part in text[len(ENCODED_PREFIX):].split(","))


class KeyEncoder:
    """Maps canonical feature keys to their ``B:i,j,k`` wire form, memoized."""

    def __init__(self, cfg: BloomConfig):
        self.cfg = cfg
        self._cache: dict[str, str] = {}

    def __call__(self, key: str) -> str:
        out = self._cache.get(key)
        if out is None:
            cfg = self.cfg
            out = format_encoded(encode_key(key, cfg.bits, cfg.hashes, cfg.seed1, cfg.seed2))
            self._cache[key] = out
        return out


@dataclass
class BloomFilter:
    z: int = 999
    q: int = 3
    seed1: int = BLOOM_SEED1
    seed2: int = BLOOM_SEED2
    bits: bytearray = field(default=None, repr=False)

    def __post_init__(self):
        if self.z < 1 or self.q < 1:
            raise ValueError(f"invalid bloom parameters z={self.z}, q={self.q}")
        if self.bits is None:
            self.bits = bytearray((self.z + 7) // 8)
        elif len(self.bits) != (self.z + 7) // 8:
            raise ValueError("bit buffer does not match z")

    def _positions(self, element):
        return hash_indices(_as_bytes(element), self.z, self.q, self.seed1, self.seed2)

    def insert(self, element) -> None:
        for i in self._positions(element):
            self.bits[i >> 3] |= 1 << (i & 7)

    def contains(self, element) -> bool:
        return all(self.bits[i >> 3] & (1 << (i & 7)) for i in self._positions(element))

    __contains__ = contains

    def popcount(self) -> int:
        return sum(bin(b).count("1") for b in self.bits)

    def union(self, other: "BloomFilter") -> "BloomFilter":
        """Bitwise OR of two filters built with identical parameters."""
        if (self.z, self.q, self.seed1, self.seed2) != (other.z, other.q, other.seed1, other.seed2):
            raise ValueError("cannot merge filters with different parameters")
        merged = bytearray(a | b for a, b in zip(self.bits, other.bits))
        return BloomFilter(self.z, self.q, self.seed1, self.seed2, merged)

    @classmethod
    def from_config(cls, cfg: BloomConfig) -> "BloomFilter":
        return cls(cfg.bits, cfg.hashes, cfg.seed1, cfg.seed2)


def expected_fp_rate(n: int, z: int = 999, q: int = 3) -> float:
    """Classical approximation (1 - e^(-qn/z))^q."""
    return (1.0 - math.exp(-q * n / z)) ** q
