"""Per-worker heavy-hitter sketches, local top-B extraction, coordinator merge
and exponentially weighted blending of past histograms.

The default ``decayed`` variant is SpaceSaving whose counters are scaled down
at batch boundaries so that heavy keys that fade lose rank; it stands in for
a counter-based heuristic whose details are not published.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import _kernels
from .errors import EmptyInput
from .partitioner import Histogram

Variant = Literal["space_saving", "lossy_counting", "decayed"]
VARIANTS = ("space_saving", "lossy_counting", "decayed")


class SketchSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: Variant = "decayed"
    capacity_factor: int = Field(10, ge=1)
    decay: float = Field(0.5, gt=0.0, le=1.0)
    sample_every: int = Field(1, ge=1)


class HistorySpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = False
    window: int = Field(5, ge=1)
    gamma: float = Field(0.5, gt=0.0, le=1.0)


@dataclass(frozen=True)
class LocalHistogram:
    worker_id: int
    entries: tuple[tuple[bytes, float], ...]
    observed: float

    def to_json(self) -> dict:
        return {
            "worker_id": self.worker_id,
            "observed": self.observed,
            "entries": [{"key_hex": k.hex(), "count": c} for k, c in self.entries],
        }

    @classmethod
    def from_json(cls, doc: dict) -> LocalHistogram:
        entries = tuple((bytes.fromhex(e["key_hex"]), float(e["count"])) for e in doc["entries"])
        return cls(int(doc["worker_id"]), entries, float(doc["observed"]))


def _top_entries(pairs: Iterable[tuple[bytes, float]], b: int) -> tuple[tuple[bytes, float], ...]:
    return tuple(sorted(pairs, key=lambda kc: (-kc[1], kc[0]))[:b])


class FrequencySketch:
    """Bounded-memory frequency counter over opaque byte-string keys.

    ``space_saving`` and ``decayed`` keep at most ``capacity`` counters;
    ``lossy_counting`` uses buckets of width ``capacity`` (error 1/capacity).

    Keys are interned to dense ids. Passing ``keys`` pre-assigns ids so a
    simulator can feed integer ids straight to :meth:`offer_ids`.
    """

    def __init__(self, capacity: int, variant: Variant = "space_saving", keys: Optional[Sequence[bytes]] = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if variant not in VARIANTS:
            raise ValueError(f"unknown sketch variant {variant!r}")
        self.capacity = int(capacity)
        self.variant = variant
        self._keys: list[bytes] = list(keys) if keys is not None else []
        self._index: Optional[dict[bytes, int]] = None
        self.reset()

    def reset(self) -> None:
        self.total_weight = 0.0
        if self.variant == "lossy_counting":
            self._lc: dict[int, list] = {}
            self._lc_n = 0
            return
        c = self.capacity
        self._slot_key = np.full(c, -1, dtype=np.int64)
        self._count = np.zeros(c, dtype=np.float64)
        self._err = np.zeros(c, dtype=np.float64)
        self._heap = np.zeros(c, dtype=np.int64)
        self._pos = np.zeros(c, dtype=np.int64)
        self._id_slot = np.full(max(len(self._keys), 16), -1, dtype=np.int64)
        self._size = 0

    # -- key interning -------------------------------------------------
    def _intern(self, key: bytes) -> int:
        if self._index is None:
            self._index = {k: i for i, k in enumerate(self._keys)}
        i = self._index.get(key)
        if i is None:
            i = self._index[key] = len(self._keys)
            self._keys.append(key)
        return i

    def _ensure_id_space(self, max_id: int) -> None:
        if self.variant != "lossy_counting" and max_id >= self._id_slot.size:
            grown = np.full(max(2 * self._id_slot.size, max_id + 1), -1, dtype=np.int64)
            grown[: self._id_slot.size] = self._id_slot
            self._id_slot = grown

    # -- updates -------------------------------------------------------
    def offer(self, key: bytes) -> None:
        i = self._intern(bytes(key))
        self.offer_ids(np.array([i], dtype=np.int64))

    def offer_ids(self, ids: np.ndarray) -> None:
        """Offer records given as key ids (one weight-1 record per element)."""
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.size == 0:
            return
        if self.variant == "lossy_counting":
            for i in ids.tolist():
                self._lossy_offer(i)
        else:
            self._ensure_id_space(int(ids.max()))
            self._size = _kernels.space_saving_offer(
                ids, self._slot_key, self._count, self._err, self._heap, self._pos, self._id_slot, self._size
            )
        self.total_weight += ids.size

    def _lossy_offer(self, i: int) -> None:
        self._lc_n += 1
        bucket = math.ceil(self._lc_n / self.capacity)
        entry = self._lc.get(i)
        if entry is None:
            self._lc[i] = [1, bucket - 1]
        else:
            entry[0] += 1
        if self._lc_n % self.capacity == 0:
            self._lc = {k: e for k, e in self._lc.items() if e[0] + e[1] > bucket}

    def decay(self, alpha: float) -> None:
        """Scale all counters and the total weight by ``alpha`` (``decayed`` only)."""
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.variant != "decayed" or alpha == 1.0:
            return
        n = self._size
        self._count[:n] *= alpha
        self._err[:n] *= alpha
        _kernels.heapify(self._heap, self._pos, self._count, n)
        self.total_weight *= alpha

    # -- queries -------------------------------------------------------
    def counters(self) -> dict[bytes, tuple[float, float]]:
        """Tracked key -> (estimated count, error bound)."""
        if self.variant == "lossy_counting":
            return {self._keys[i]: (float(c), float(d)) for i, (c, d) in self._lc.items()}
        n = self._size
        return {
            self._keys[k]: (float(c), float(e))
            for k, c, e in zip(self._slot_key[:n].tolist(), self._count[:n].tolist(), self._err[:n].tolist())
        }

    def __len__(self) -> int:
        return len(self._lc) if self.variant == "lossy_counting" else self._size

    def estimate(self, key: bytes) -> float:
        return self.counters().get(bytes(key), (0.0, 0.0))[0]

    def local_top(self, b: int, worker_id: int = 0) -> LocalHistogram:
        """The ``b`` largest estimated counts, descending, ties by key bytes."""
        if b < 1:
            raise ValueError("b must be >= 1")
        if self.variant == "lossy_counting":
            pairs = [(self._keys[i], float(e[0])) for i, e in self._lc.items()]
        else:
            n = self._size
            counts = self._count[:n]
            slots = np.arange(n)
            if n > b:
                cutoff = np.partition(counts, n - b)[n - b]
                slots = slots[counts >= cutoff]
            pairs = [(self._keys[self._slot_key[s]], float(counts[s])) for s in slots]
        return LocalHistogram(worker_id, _top_entries(pairs, b), float(self.total_weight))


def offer(sketch: FrequencySketch, key: bytes) -> None:
    sketch.offer(key)


def local_top(sketch: FrequencySketch, b: int, worker_id: int = 0) -> LocalHistogram:
    return sketch.local_top(b, worker_id)


def decay_sketch(sketch: FrequencySketch, alpha: float) -> None:
    sketch.decay(alpha)


def merge(locals_: Sequence[LocalHistogram], b: int) -> Histogram:
    """Sum counts per key across workers and normalise by the total observed.

    Sums use ``math.fsum`` so the result does not depend on worker order.
    """
    if not locals_:
        raise EmptyInput("no local histograms to merge")
    observed = math.fsum(h.observed for h in locals_)
    if observed <= 0:
        raise EmptyInput("local histograms observed no records")
    parts: dict[bytes, list[float]] = {}
    for h in locals_:
        if math.fsum(c for _, c in h.entries) > h.observed * (1 + 1e-12):
            raise ValueError(f"worker {h.worker_id} reports more counts than records observed")
        for k, c in h.entries:
            parts.setdefault(k, []).append(c)
    freqs = {k: min(1.0, math.fsum(cs) / observed) for k, cs in parts.items()}
    return Histogram.from_freqs(freqs, b)


class HistogramHistory:
    """The last ``window`` merged histograms, newest last."""

    def __init__(self, window: int = 5, gamma: float = 0.5):
        if window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        self.window = window
        self.gamma = gamma
        self.ring: deque[tuple[int, Histogram]] = deque(maxlen=window)
        self._pushed = 0

    def __len__(self) -> int:
        return len(self.ring)

    def push(self, hist: Histogram, batch_index: Optional[int] = None) -> None:
        self.ring.append((self._pushed if batch_index is None else batch_index, hist))
        self._pushed += 1

    def blend(self, fresh: Histogram, batch_index: Optional[int] = None) -> Histogram:
        """Push ``fresh`` and return the gamma**age weighted average over the ring."""
        self.push(fresh, batch_index)
        if len(self.ring) == 1:
            return fresh
        hists = [h for _, h in reversed(self.ring)]
        weights = [self.gamma**age for age in range(len(hists))]
        norm = math.fsum(weights)
        parts: dict[bytes, list[float]] = {}
        for w, h in zip(weights, hists):
            for k, f in h.entries:
                parts.setdefault(k, []).append(w * f)
        freqs = {k: math.fsum(v) / norm for k, v in parts.items()}
        return Histogram.from_freqs(freqs, fresh.capacity)


def blend(history: HistogramHistory, fresh: Histogram, batch_index: Optional[int] = None) -> Histogram:
    return history.blend(fresh, batch_index)
