"""Keyed record streams: seeded Zipf generation with drift, and the text file format.

Streams are held as an array of integer key ids into a :class:`KeyTable`, so
routing and counting can be vectorised over distinct keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import StreamFormatError
from .hashing import hash_many

TOKEN_LENGTH = 12
_ALPHABET = np.frombuffer(b"abcdefghijklmnopqrstuvwxyz0123456789", dtype=np.uint8)
HEX_PREFIX = "hex:"


class DriftSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    period_batches: int = Field(5, ge=1)
    mode: Literal["permute_top_k", "reseed"] = "permute_top_k"
    k: int = Field(100, ge=1)


class StreamSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    source: Literal["zipf", "file"] = "zipf"
    total_records: int = Field(100_000, ge=1)
    distinct_keys: int = Field(100_000, ge=1)
    exponent: float = Field(1.0, ge=0.0)
    seed: int = Field(0, ge=0, lt=2**64)
    drift: Optional[DriftSpec] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _file_needs_path(self):
        if self.source == "file" and not self.path:
            raise ValueError("stream.path is required when stream.source is 'file'")
        return self


class KeyTable:
    """Distinct keys in first-seen order, with cached 64-bit hashes per seed."""

    def __init__(self, keys: Sequence[bytes]):
        self.keys: list[bytes] = [bytes(k) for k in keys]
        self.index: dict[bytes, int] = {k: i for i, k in enumerate(self.keys)}
        if len(self.index) != len(self.keys):
            raise ValueError("key table entries must be distinct")
        self._hashes: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.keys)

    def hashes(self, seed: int) -> np.ndarray:
        h = self._hashes.get(seed)
        if h is None:
            h = self._hashes[seed] = hash_many(self.keys, seed)
        return h

    def buckets(self, n_buckets: int, seed: int) -> np.ndarray:
        return (self.hashes(seed) % np.uint64(n_buckets)).astype(np.int64)


@dataclass
class KeyStream:
    table: KeyTable
    ids: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.ids.size)

    def __iter__(self) -> Iterator[bytes]:
        keys = self.table.keys
        return (keys[i] for i in self.ids)

    def to_list(self) -> list[bytes]:
        return list(self)

    @classmethod
    def from_keys(cls, keys: Sequence[bytes]) -> KeyStream:
        index: dict[bytes, int] = {}
        ids = np.fromiter((index.setdefault(bytes(k), len(index)) for k in keys), dtype=np.int64)
        return cls(KeyTable(list(index)), ids)


def _tokens(rng: np.random.Generator, count: int) -> list[bytes]:
    seen: set[bytes] = set()
    out: list[bytes] = []
    while len(out) < count:
        raw = _ALPHABET[rng.integers(0, _ALPHABET.size, size=(count - len(out), TOKEN_LENGTH))]
        for row in raw:
            tok = row.tobytes()
            if tok not in seen:
                seen.add(tok)
                out.append(tok)
    return out


def zipf_probabilities(distinct_keys: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, distinct_keys + 1, dtype=np.float64)
    w = ranks ** (-exponent)
    return w / w.sum()


def gen_zipf(spec: StreamSpec, batch_size: Optional[int] = None) -> KeyStream:
    """Draw ``spec.total_records`` keys i.i.d. with P(rank r) proportional to r**-exponent.

    Ranks map to random fixed-length ASCII tokens. With drift, every
    ``period_batches`` batches the rank-to-key mapping of the top ``k`` ranks
    is shuffled (``permute_top_k``) or the whole mapping is redrawn
    (``reseed``). ``batch_size`` defaults to the whole stream.
    """
    token_ss, draw_ss, drift_ss = np.random.SeedSequence(spec.seed).spawn(3)
    table = KeyTable(_tokens(np.random.default_rng(token_ss), spec.distinct_keys))
    cdf = np.cumsum(zipf_probabilities(spec.distinct_keys, spec.exponent))
    draw_rng = np.random.default_rng(draw_ss)
    drift_rng = np.random.default_rng(drift_ss)

    n = spec.total_records
    bs = batch_size or n
    rank_to_id = np.arange(spec.distinct_keys, dtype=np.int64)
    ids = np.empty(n, dtype=np.int64)
    drift = spec.drift
    for b, start in enumerate(range(0, n, bs)):
        if drift is not None and b > 0 and b % drift.period_batches == 0:
            if drift.mode == "permute_top_k":
                k = min(drift.k, spec.distinct_keys)
                rank_to_id[:k] = rank_to_id[:k][drift_rng.permutation(k)]
            else:
                rank_to_id = drift_rng.permutation(rank_to_id)
        stop = min(start + bs, n)
        ranks = np.searchsorted(cdf, draw_rng.random(stop - start), side="right")
        np.minimum(ranks, spec.distinct_keys - 1, out=ranks)
        ids[start:stop] = rank_to_id[ranks]
    return KeyStream(table, ids)


def encode_key(key: bytes) -> str:
    try:
        text = key.decode("utf-8")
    except UnicodeDecodeError:
        return HEX_PREFIX + key.hex()
    if not text or text.startswith(HEX_PREFIX) or any(c in text for c in ",\r\n") or text != text.strip():
        return HEX_PREFIX + key.hex()
    return text


def decode_key(text: str) -> bytes:
    if text.startswith(HEX_PREFIX):
        return bytes.fromhex(text[len(HEX_PREFIX) :])
    return text.encode("utf-8")


def save_stream(stream: KeyStream, path) -> None:
    keys = [encode_key(k) for k in stream.table.keys]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key\n")
        for i in stream.ids:
            fh.write(keys[i])
            fh.write("\n")


def load_stream(path) -> KeyStream:
    """Read a stream file: header ``key`` or ``key,weight``, then one record per line.

    A ``weight`` column must hold a positive integer and repeats the key
    that many times. Keys prefixed with ``hex:`` are hex-decoded.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise StreamFormatError(path, 1, "missing header")
    header = lines[0].strip()
    if header not in ("key", "key,weight"):
        raise StreamFormatError(path, 1, f"expected header 'key' or 'key,weight', got {header!r}")
    weighted = header == "key,weight"

    keys: list[bytes] = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        if weighted:
            key_text, sep, weight_text = line.rpartition(",")
            if not sep:
                raise StreamFormatError(path, lineno, "expected 'key,weight'")
            try:
                weight = int(weight_text)
            except ValueError:
                raise StreamFormatError(path, lineno, f"weight {weight_text!r} is not an integer") from None
            if weight < 1:
                raise StreamFormatError(path, lineno, "weight must be >= 1")
        else:
            key_text, weight = line, 1
        if not key_text:
            raise StreamFormatError(path, lineno, "empty key")
        if "," in key_text:
            raise StreamFormatError(path, lineno, "keys may not contain commas")
        try:
            key = decode_key(key_text)
        except ValueError:
            raise StreamFormatError(path, lineno, f"bad hex key {key_text!r}") from None
        keys.extend([key] * weight)
    return KeyStream.from_keys(keys)


def materialize(spec: StreamSpec, batch_size: Optional[int] = None) -> KeyStream:
    if spec.source == "file":
        return load_stream(spec.path)
    return gen_zipf(spec, batch_size)
