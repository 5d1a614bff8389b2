"""Seeded MurmurHash3 (x64, 128-bit variant) used to spread keys over hosts.

Only the first 64-bit half of the digest is used. For seeds below 2**32 the
output matches the reference ``MurmurHash3_x64_128``; larger seeds simply
initialise both lanes with the full 64-bit value.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_C1 = 0x87C37B91114253D5
_C2 = 0x4CF5AD432745937F


def _rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (64 - r))) & MASK64


def _fmix(k: int) -> int:
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & MASK64
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & MASK64
    k ^= k >> 33
    return k


def murmur3_64(key: bytes, seed: int = 0) -> int:
    """Return the low 64 bits of MurmurHash3_x64_128(key, seed) as an unsigned int."""
    seed &= MASK64
    length = len(key)
    h1 = h2 = seed
    nblocks = length // 16

    for i in range(nblocks):
        k1 = int.from_bytes(key[i * 16 : i * 16 + 8], "little")
        k2 = int.from_bytes(key[i * 16 + 8 : i * 16 + 16], "little")

        k1 = (k1 * _C1) & MASK64
        k1 = _rotl(k1, 31)
        k1 = (k1 * _C2) & MASK64
        h1 ^= k1
        h1 = _rotl(h1, 27)
        h1 = (h1 + h2) & MASK64
        h1 = (h1 * 5 + 0x52DCE729) & MASK64

        k2 = (k2 * _C2) & MASK64
        k2 = _rotl(k2, 33)
        k2 = (k2 * _C1) & MASK64
        h2 ^= k2
        h2 = _rotl(h2, 31)
        h2 = (h2 + h1) & MASK64
        h2 = (h2 * 5 + 0x38495AB5) & MASK64

    tail = key[nblocks * 16 :]
    if tail:
        k1 = int.from_bytes(tail[:8], "little")
        if len(tail) > 8:
            k2 = int.from_bytes(tail[8:], "little")
            k2 = (k2 * _C2) & MASK64
            k2 = _rotl(k2, 33)
            k2 = (k2 * _C1) & MASK64
            h2 ^= k2
        k1 = (k1 * _C1) & MASK64
        k1 = _rotl(k1, 31)
        k1 = (k1 * _C2) & MASK64
        h1 ^= k1

    h1 ^= length
    h2 ^= length
    h1 = (h1 + h2) & MASK64
    h2 = (h2 + h1) & MASK64
    h1 = _fmix(h1)
    h2 = _fmix(h2)
    h1 = (h1 + h2) & MASK64
    return h1


def uniform_hash(key: bytes, n_buckets: int, seed: int = 0) -> int:
    """Map ``key`` to a bucket in ``[0, n_buckets)``."""
    if n_buckets < 1:
        raise ValueError("n_buckets must be >= 1")
    return murmur3_64(key, seed) % n_buckets


def hash_many(keys: Iterable[bytes], seed: int = 0) -> np.ndarray:
    """64-bit hashes of ``keys`` as a ``uint64`` array (bucket = hash % n)."""
    return np.fromiter((murmur3_64(k, seed) for k in keys), dtype=np.uint64)
