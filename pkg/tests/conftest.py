import itertools
import math
import random

import numpy as np
import pytest

from kipart.partitioner import (
    Histogram,
    KeyIsolatorPartitioner,
    PartitionerConfig,
    WeightedHashPartitioner,
    allowed_load,
    host_load,
)


def feasible_assignment_exists(hist: Histogram, cfg: PartitionerConfig) -> bool:
    """Exhaustive oracle: can heavy keys and hosts be placed with every load <= maxload?

    Enumerates every heavy-key -> partition assignment. Hosts carry identical
    estimated load, so for a fixed key assignment the best host placement
    fills each partition with floor((maxload - heavy) / hostload) hosts.
    """
    n, h = cfg.num_partitions, cfg.num_hosts
    maxload = allowed_load(hist, cfg)
    hostload = host_load(hist, h)
    freqs = [f for _, f in hist.entries]
    for assign in itertools.product(range(n), repeat=len(freqs)):
        heavy = [0.0] * n
        for p, f in zip(assign, freqs):
            heavy[p] += f
        if max(heavy) > maxload + 1e-12:
            continue
        if hostload == 0.0:
            return True
        if sum(math.floor((maxload - x) / hostload + 1e-9) for x in heavy) >= h:
            return True
    return False


def feasible_by_full_enumeration(hist: Histogram, cfg: PartitionerConfig) -> bool:
    """Same question, enumerating host assignments too (tiny instances only)."""
    n, h = cfg.num_partitions, cfg.num_hosts
    maxload = allowed_load(hist, cfg)
    hostload = host_load(hist, h)
    freqs = [f for _, f in hist.entries]
    for assign in itertools.product(range(n), repeat=len(freqs) + h):
        loads = [0.0] * n
        for p, f in zip(assign, freqs):
            loads[p] += f
        for p in assign[len(freqs):]:
            loads[p] += hostload
        if max(loads) <= maxload + 1e-9:
            return True
    return False


def random_instance(rng: random.Random, max_n=4, max_keys=6, max_hosts=12):
    """Random (prev partitioner, histogram, config) with N <= 4, |hist| <= 6, H <= 12."""
    n = rng.randint(1, max_n)
    h = rng.randint(n, max_hosts)
    m = rng.randint(0, max_keys)
    w = np.random.default_rng(rng.randrange(2**32)).dirichlet(np.full(m + 1, rng.choice([0.3, 1.0, 3.0])))
    keys = [bytes([i]) for i in range(m)]
    hist = Histogram.from_freqs(dict(zip(keys, w[:m].tolist())), max(m, 1))
    cfg = PartitionerConfig(
        num_partitions=n,
        num_hosts=h,
        lam=1,
        epsilon=rng.choice([0.0, 0.05, rng.random() * 0.5]),
        hash_seed=rng.randrange(1000),
    )
    routing = np.array([rng.randrange(n) for _ in range(h)])
    explicit = {k: rng.randrange(n) for k in keys if rng.random() < 0.5}
    prev = KeyIsolatorPartitioner(explicit, WeightedHashPartitioner(routing, cfg.hash_seed, n), rng.randrange(5))
    return prev, hist, cfg


@pytest.fixture(autouse=True)
def _quiet_host_warning(recwarn):
    # small test configs routinely use H < 10 N
    yield
