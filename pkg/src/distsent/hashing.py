"""Seeded 64-bit hashing shared by the Bloom encoder and the shuffle partitioner."""

from hashlib import blake2b

# Fixed seeds. Changing any of them changes every encoded key and every
# partition assignment, so they are recorded in run.toml.
BLOOM_SEED1 = 0x9E3779B97F4A7C15
BLOOM_SEED2 = 0xC2B2AE3D27D4EB4F
PARTITION_SEED = 0x165667B19E3779F9

_MASK64 = (1 << 64) - 1


def hash64(data: bytes, seed: int) -> int:
    """Keyed BLAKE2b truncated to 64 bits. Stable across runs and platforms."""
    key = (seed & _MASK64).to_bytes(8, "little")
    return int.from_bytes(blake2b(data, digest_size=8, key=key).digest(), "little")
