import os
import random

import numpy as np
import pytest
from scipy import stats

from kipart.hashing import hash_many, murmur3_64, uniform_hash


def test_single_bucket():
    assert uniform_hash(b"", 1, 12345) == 0


def test_deterministic():
    assert uniform_hash(b"key-17", 97, 5) == uniform_hash(b"key-17", 97, 5)


def test_seed_changes_bucket_assignment():
    keys = [str(i).encode() for i in range(200)]
    a = [uniform_hash(k, 64, 1) for k in keys]
    b = [uniform_hash(k, 64, 2) for k in keys]
    assert a != b


def test_rejects_zero_buckets():
    with pytest.raises(ValueError):
        uniform_hash(b"x", 0, 0)


@pytest.mark.parametrize("length", list(range(0, 40)))
def test_matches_reference_murmur3(length):
    mmh3 = pytest.importorskip("mmh3")
    rng = random.Random(length)
    key = bytes(rng.randrange(256) for _ in range(length))
    for seed in (0, 1, 0xDEADBEEF, 2**32 - 1):
        assert murmur3_64(key, seed) == mmh3.hash64(key, seed, signed=False)[0]


def test_full_64bit_seed_is_used():
    assert murmur3_64(b"abc", 5) != murmur3_64(b"abc", 5 + 2**40)


def test_hash_many_agrees_with_scalar():
    keys = [os.urandom(7) for _ in range(50)]
    arr = hash_many(keys, 9)
    assert arr.dtype == np.uint64
    assert [int(x) for x in arr] == [murmur3_64(k, 9) for k in keys]


def test_chi_squared_uniformity():
    rng = np.random.default_rng(2024)
    raw = rng.integers(0, 256, size=(100_000, 8), dtype=np.uint8)
    counts = np.zeros(64, dtype=np.int64)
    for row in raw:
        counts[uniform_hash(row.tobytes(), 64, 77)] += 1
    expected = raw.shape[0] / 64
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # two-sided 99% band for 63 degrees of freedom
    lo, hi = stats.chi2.ppf([0.005, 0.995], df=63)
    assert lo < chi2 < hi
