"""Key Isolator Partitioner: explicit routes for heavy keys on top of a
weighted hash partitioner, and the update procedure that rebuilds it from a
fresh heavy-key histogram while moving as little state as possible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigMismatch
from .hashing import uniform_hash

if TYPE_CHECKING:
    from .stream import KeyTable

SERIAL_VERSION = 1
_FREQ_TOL = 1e-9
_LOAD_TOL = 1e-12

# Placement tiers reported by kip_update_traced.
TIER_PREVIOUS = "previous"
TIER_HASH = "hash"
TIER_LOWEST = "lowest"


class PartitionerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    num_partitions: int = Field(20, ge=1)
    num_hosts: int = Field(2000, ge=1)
    lam: int = Field(2, ge=1, alias="lambda")
    epsilon: float = Field(0.05, ge=0.0, lt=1.0)
    hash_seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _hosts_cover_partitions(self):
        if self.num_hosts < self.num_partitions:
            raise ValueError("num_hosts must be >= num_partitions")
        if self.num_hosts < 10 * self.num_partitions:
            warnings.warn(
                f"num_hosts={self.num_hosts} is below 10x num_partitions; "
                "host moves will be coarse",
                stacklevel=2,
            )
        return self

    @property
    def histogram_size(self) -> int:
        """Number of heavy keys tracked, ``lambda * num_partitions``."""
        return self.lam * self.num_partitions


@dataclass(frozen=True)
class Histogram:
    """Top-B heavy keys with frequencies relative to the whole input.

    Entries are sorted by descending frequency (ties by key bytes). The
    frequencies of keys outside the histogram make up ``1 - total``.
    """

    entries: tuple[tuple[bytes, float], ...]
    capacity: int

    def __post_init__(self):
        entries = tuple((bytes(k), float(f)) for k, f in self.entries)
        object.__setattr__(self, "entries", entries)
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(entries) > self.capacity:
            raise ValueError(f"{len(entries)} entries exceed capacity {self.capacity}")
        if len({k for k, _ in entries}) != len(entries):
            raise ValueError("histogram keys must be distinct")
        prev = float("inf")
        for _, f in entries:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"frequency {f} outside [0, 1]")
            if f > prev:
                raise ValueError("histogram entries must be sorted by descending frequency")
            prev = f
        if self.total > 1.0 + _FREQ_TOL:
            raise ValueError(f"frequencies sum to {self.total} > 1")

    @classmethod
    def from_freqs(cls, freqs: Mapping[bytes, float] | Iterable[tuple[bytes, float]], capacity: int) -> Histogram:
        """Sort, truncate to ``capacity`` and wrap."""
        items = freqs.items() if isinstance(freqs, Mapping) else freqs
        ranked = sorted(((bytes(k), float(f)) for k, f in items), key=lambda kv: (-kv[1], kv[0]))
        return cls(tuple(ranked[:capacity]), capacity)

    @property
    def total(self) -> float:
        return float(sum(f for _, f in self.entries))

    @property
    def top_freq(self) -> float:
        return self.entries[0][1] if self.entries else 0.0

    def keys(self) -> list[bytes]:
        return [k for k, _ in self.entries]

    def as_dict(self) -> dict[bytes, float]:
        return dict(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class WeightedHashPartitioner:
    """Keys hash uniformly onto ``H`` virtual hosts; hosts map to partitions."""

    host_routing: np.ndarray
    hash_seed: int
    num_partitions: int

    def __post_init__(self):
        routing = _frozen_array(self.host_routing)
        if routing.ndim != 1 or routing.size == 0:
            raise ValueError("host_routing must be a non-empty 1-d array")
        if routing.min() < 0 or routing.max() >= self.num_partitions:
            raise ValueError("host_routing entries must lie in [0, num_partitions)")
        object.__setattr__(self, "host_routing", routing)

    @classmethod
    def round_robin(cls, num_partitions: int, num_hosts: int, hash_seed: int = 0) -> WeightedHashPartitioner:
        return cls(np.arange(num_hosts) % num_partitions, hash_seed, num_partitions)

    @property
    def num_hosts(self) -> int:
        return int(self.host_routing.size)

    def host(self, key: bytes) -> int:
        return uniform_hash(key, self.num_hosts, self.hash_seed)

    def route(self, key: bytes) -> int:
        return int(self.host_routing[self.host(key)])

    def hosts_per_partition(self) -> np.ndarray:
        return np.bincount(self.host_routing, minlength=self.num_partitions)

    def __eq__(self, other):
        if not isinstance(other, WeightedHashPartitioner):
            return NotImplemented
        return (
            self.hash_seed == other.hash_seed
            and self.num_partitions == other.num_partitions
            and np.array_equal(self.host_routing, other.host_routing)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class KeyIsolatorPartitioner:
    explicit_routes: Mapping[bytes, int]
    weighted: WeightedHashPartitioner
    version: int = 0

    def __post_init__(self):
        routes = {bytes(k): int(p) for k, p in dict(self.explicit_routes).items()}
        n = self.weighted.num_partitions
        for k, p in routes.items():
            if not 0 <= p < n:
                raise ValueError(f"explicit route {p} for key {k!r} outside [0, {n})")
        object.__setattr__(self, "explicit_routes", MappingProxyType(routes))

    @classmethod
    def initial(cls, cfg: PartitionerConfig) -> KeyIsolatorPartitioner:
        """Fresh partitioner: no explicit routes, hosts dealt round-robin."""
        weighted = WeightedHashPartitioner.round_robin(cfg.num_partitions, cfg.num_hosts, cfg.hash_seed)
        return cls({}, weighted, 0)

    @property
    def num_partitions(self) -> int:
        return self.weighted.num_partitions

    @property
    def num_hosts(self) -> int:
        return self.weighted.num_hosts

    @property
    def hash_seed(self) -> int:
        return self.weighted.hash_seed

    def route(self, key: bytes) -> int:
        p = self.explicit_routes.get(key)
        if p is not None:
            return p
        return self.weighted.route(key)

    def route_table(self, table: KeyTable) -> np.ndarray:
        """Partition of every key in ``table``, indexed by key id."""
        parts = self.weighted.host_routing[table.buckets(self.num_hosts, self.hash_seed)].copy()
        for key, p in self.explicit_routes.items():
            idx = table.index.get(key)
            if idx is not None:
                parts[idx] = p
        return parts

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "num_partitions": self.num_partitions,
            "num_hosts": self.num_hosts,
            "hash_seed": self.hash_seed,
            "host_routing": [int(p) for p in self.weighted.host_routing],
            "explicit_routes": [
                {"key_hex": k.hex(), "partition": p} for k, p in sorted(self.explicit_routes.items())
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> KeyIsolatorPartitioner:
        routing = doc["host_routing"]
        if len(routing) != doc["num_hosts"]:
            raise ValueError("host_routing length does not match num_hosts")
        weighted = WeightedHashPartitioner(np.asarray(routing), int(doc["hash_seed"]), int(doc["num_partitions"]))
        routes = {bytes.fromhex(r["key_hex"]): int(r["partition"]) for r in doc["explicit_routes"]}
        return cls(routes, weighted, int(doc["version"]))

    def __eq__(self, other):
        if not isinstance(other, KeyIsolatorPartitioner):
            return NotImplemented
        return (
            self.version == other.version
            and self.weighted == other.weighted
            and dict(self.explicit_routes) == dict(other.explicit_routes)
        )

    __hash__ = None


@dataclass(frozen=True)
class LoadVector:
    loads: tuple[float, ...]
    maxload: float
    hostload: float

    @property
    def max(self) -> float:
        return max(self.loads)

    @property
    def imbalance(self) -> float:
        """Estimated max load over mean load (mean is ``1 / N``)."""
        return self.max * len(self.loads)


def allowed_load(hist: Histogram, cfg: PartitionerConfig) -> float:
    """``max(1/N, heaviest frequency)`` plus slack; ``epsilon`` is a fraction of the mean load 1/N."""
    mean = 1.0 / cfg.num_partitions
    return max(mean, hist.top_freq) + cfg.epsilon * mean


def host_load(hist: Histogram, num_hosts: int) -> float:
    return max(0.0, 1.0 - hist.total) / num_hosts


def _check_compatible(prev: KeyIsolatorPartitioner, cfg: PartitionerConfig) -> None:
    ours = (prev.num_partitions, prev.num_hosts, prev.hash_seed)
    theirs = (cfg.num_partitions, cfg.num_hosts, cfg.hash_seed)
    if ours != theirs:
        raise ConfigMismatch(f"partitioner (N, H, seed)={ours} does not match config {theirs}")


def kip_update_traced(
    prev: KeyIsolatorPartitioner, hist: Histogram, cfg: PartitionerConfig
) -> tuple[KeyIsolatorPartitioner, dict[bytes, str]]:
    """Like :func:`kip_update`, also returning the placement tier of each heavy key."""
    _check_compatible(prev, cfg)
    n = cfg.num_partitions
    maxload = allowed_load(hist, cfg)
    hostload = host_load(hist, cfg.num_hosts)

    heavy_load = [0.0] * n
    routes: dict[bytes, int] = {}
    tiers: dict[bytes, str] = {}
    for key, f in hist.entries:
        room = maxload - f
        p = prev.route(key)
        tier = TIER_PREVIOUS
        if not heavy_load[p] < room:
            p = prev.weighted.route(key)
            tier = TIER_HASH
            if not heavy_load[p] < room:
                p = min(range(n), key=heavy_load.__getitem__)
                tier = TIER_LOWEST
        routes[key] = p
        tiers[key] = tier
        heavy_load[p] += f

    host_routing = prev.weighted.host_routing.copy()
    load = [heavy_load[p] + hostload * c for p, c in enumerate(np.bincount(host_routing, minlength=n))]

    if hostload > 0.0:
        # a destination may be filled up to exactly maxload
        target = maxload - hostload + _LOAD_TOL
        for p in range(n):
            if not load[p] > maxload:
                continue
            for h in np.flatnonzero(host_routing == p):
                if not load[p] > maxload:
                    break
                dest = next((q for q in range(n) if load[q] <= target), None)
                if dest is None:
                    break
                host_routing[h] = dest
                load[p] -= hostload
                load[dest] += hostload

    weighted = WeightedHashPartitioner(host_routing, cfg.hash_seed, n)
    return KeyIsolatorPartitioner(routes, weighted, prev.version + 1), tiers


def kip_update(prev: KeyIsolatorPartitioner, hist: Histogram, cfg: PartitionerConfig) -> KeyIsolatorPartitioner:
    """Build the next partitioner from ``prev`` and the merged histogram.

    Heavy keys are placed in decreasing frequency order: on their previous
    partition if it has room, else on their hash location, else on the least
    loaded partition. Every heavy key gets an explicit route. Hosts are then
    moved out of partitions above the allowed level into the lowest-indexed
    partitions that can still take a whole host. ``prev`` is not modified.
    """
    return kip_update_traced(prev, hist, cfg)[0]


def estimated_loads(p: KeyIsolatorPartitioner, hist: Histogram, cfg: PartitionerConfig) -> LoadVector:
    """Heavy-key frequencies plus ``hostload`` per host routed to each partition."""
    hostload = host_load(hist, p.num_hosts)
    loads = hostload * p.weighted.hosts_per_partition().astype(float)
    for key, f in hist.entries:
        loads[p.route(key)] += f
    return LoadVector(tuple(float(x) for x in loads), allowed_load(hist, cfg), hostload)


def migration_fraction(
    old: KeyIsolatorPartitioner, new: KeyIsolatorPartitioner, state: Mapping[bytes, int]
) -> float:
    """Share of total state whose key changes partition between ``old`` and ``new``."""
    if old.num_partitions != new.num_partitions:
        raise ConfigMismatch("partitioners disagree on num_partitions")
    total = moved = 0
    for key, size in state.items():
        if size < 0:
            raise ValueError(f"negative state size for key {key!r}")
        total += size
        if size and old.route(key) != new.route(key):
            moved += size
    return moved / total if total else 0.0


def migration_fraction_table(old_parts: np.ndarray, new_parts: np.ndarray, state: np.ndarray) -> float:
    """Vectorised :func:`migration_fraction` over a key table's route arrays."""
    total = float(state.sum())
    if total <= 0.0:
        return 0.0
    return float(state[old_parts != new_parts].sum()) / total

