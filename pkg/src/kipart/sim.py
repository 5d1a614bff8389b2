"""Batch-replay simulator: route each batch with the current partitioner,
sample it into per-worker sketches, and at the batch boundary build a
candidate partitioner and decide whether installing it is worth the cost.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .metrics import BatchReport, load_imbalance
from .partitioner import (
    Histogram,
    KeyIsolatorPartitioner,
    PartitionerConfig,
    estimated_loads,
    kip_update,
    migration_fraction_table,
)
from .sketch import FrequencySketch, HistogramHistory, HistorySpec, LocalHistogram, SketchSpec, merge
from .stream import KeyStream, KeyTable, StreamSpec, materialize


class GateSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["always", "never", "cost_benefit"] = "always"
    benefit_margin: float = Field(0.0, ge=0.0)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    stream: StreamSpec = StreamSpec()
    partitioner_cfg: PartitionerConfig = PartitionerConfig()
    num_workers: int = Field(4, ge=1)
    batch_size: int = Field(100_000, ge=1)
    state_window_batches: int = Field(5, ge=1)
    repartition_gate: GateSpec = GateSpec()
    sketch: SketchSpec = SketchSpec()
    history: HistorySpec = HistorySpec()
    replay_model: bool = False
    replay_fraction: float = Field(0.1, gt=0.0, le=1.0)
    single_thread: bool = False


def gate_decide(gate: GateSpec, est_old_imbalance: float, est_new_imbalance: float, migration: float) -> bool:
    """Install the candidate only if its estimated imbalance gain beats the cost."""
    if gate.mode == "always":
        return True
    if gate.mode == "never":
        return False
    return (est_old_imbalance - est_new_imbalance) > gate.benefit_margin + migration


class SlidingState:
    """Per-key record counts of the last ``window`` batches."""

    def __init__(self, window: int, num_keys: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.ring: deque[np.ndarray] = deque()
        self.total = np.zeros(num_keys, dtype=np.int64)

    def push(self, batch_counts: np.ndarray) -> None:
        batch_counts = np.asarray(batch_counts, dtype=np.int64)
        self.ring.append(batch_counts)
        self.total += batch_counts
        if len(self.ring) > self.window:
            self.total -= self.ring.popleft()

    @property
    def size(self) -> int:
        return int(self.total.sum())

    def as_state_map(self, table: KeyTable) -> dict[bytes, int]:
        nz = np.flatnonzero(self.total)
        return {table.keys[i]: int(self.total[i]) for i in nz}


Observer = Callable[[int, Sequence[LocalHistogram], Histogram, KeyIsolatorPartitioner], None]


class _Worker:
    def __init__(self, worker_id: int, sketch: FrequencySketch, sample_every: int):
        self.worker_id = worker_id
        self.sketch = sketch
        self.sample_every = sample_every

    def process(self, ids: np.ndarray, parts: np.ndarray, n: int) -> np.ndarray:
        self.sketch.offer_ids(ids[:: self.sample_every])
        return np.bincount(parts[ids], minlength=n)


def _worker_slices(ids: np.ndarray, start: int, num_workers: int) -> list[np.ndarray]:
    # record with global index i belongs to worker i mod num_workers
    return [ids[(w - start) % num_workers :: num_workers] for w in range(num_workers)]


def run_simulation(
    cfg: SimConfig, stream: Optional[KeyStream] = None, observer: Optional[Observer] = None
) -> list[BatchReport]:
    """Replay the configured stream batch by batch and report per-batch metrics."""
    if stream is None:
        stream = materialize(cfg.stream, cfg.batch_size)
    table = stream.table
    pcfg = cfg.partitioner_cfg
    n_parts = pcfg.num_partitions
    b = pcfg.histogram_size
    capacity = cfg.sketch.capacity_factor * b

    current = KeyIsolatorPartitioner.initial(pcfg)
    parts = current.route_table(table)
    workers = [
        _Worker(w, FrequencySketch(capacity, cfg.sketch.variant, keys=table.keys), cfg.sketch.sample_every)
        for w in range(cfg.num_workers)
    ]
    history = HistogramHistory(cfg.history.window, cfg.history.gamma) if cfg.history.enabled else None
    sliding = SlidingState(cfg.state_window_batches, len(table))
    pool = None if cfg.single_thread or cfg.num_workers == 1 else ThreadPoolExecutor(cfg.num_workers)

    def fan_out(slices: list[np.ndarray], route: np.ndarray) -> np.ndarray:
        if pool is None:
            tallies = [wk.process(s, route, n_parts) for wk, s in zip(workers, slices)]
        else:
            tallies = list(pool.map(lambda ws: ws[0].process(ws[1], route, n_parts), zip(workers, slices)))
        return np.sum(tallies, axis=0, dtype=np.int64)

    def candidate_for(batch_index: int) -> tuple[Histogram, list[LocalHistogram]]:
        locals_ = [wk.sketch.local_top(b, wk.worker_id) for wk in workers]
        if sum(h.observed for h in locals_) > 0:
            fresh = merge(locals_, b)
        else:
            fresh = Histogram((), b)
        hist = history.blend(fresh, batch_index) if history is not None else fresh
        return hist, locals_

    reports: list[BatchReport] = []
    try:
        for t, start in enumerate(range(0, len(stream), cfg.batch_size)):
            ids = stream.ids[start : start + cfg.batch_size]
            if cfg.replay_model:
                cut = math.ceil(cfg.replay_fraction * ids.size)
                counts = fan_out(_worker_slices(ids[:cut], start, cfg.num_workers), parts)
            else:
                counts = fan_out(_worker_slices(ids, start, cfg.num_workers), parts)

            hist, locals_ = candidate_for(t)
            candidate = kip_update(current, hist, pcfg)
            cand_parts = candidate.route_table(table)
            sliding.push(np.bincount(ids, minlength=len(table)))
            migration = migration_fraction_table(parts, cand_parts, sliding.total)
            cost = cfg.replay_fraction if cfg.replay_model else migration
            accepted = gate_decide(
                cfg.repartition_gate,
                estimated_loads(current, hist, pcfg).imbalance,
                estimated_loads(candidate, hist, pcfg).imbalance,
                cost,
            )
            if accepted:
                current, parts = candidate, cand_parts

            if cfg.replay_model:
                # the processed prefix is replayed with whichever partitioner won
                rest = ids[cut:]
                counts = np.bincount(parts[ids[:cut]], minlength=n_parts) + fan_out(
                    _worker_slices(rest, start + cut, cfg.num_workers), parts
                )
                moved = 0.0
            else:
                moved = migration if accepted else 0.0

            if cfg.sketch.variant == "decayed":
                for wk in workers:
                    wk.sketch.decay(cfg.sketch.decay)
            if observer is not None:
                observer(t, locals_, hist, current)

            reports.append(
                BatchReport(
                    batch_index=t,
                    per_partition_counts=tuple(int(c) for c in counts),
                    imbalance=load_imbalance(counts.tolist()),
                    migration=moved,
                    repartitioned=accepted,
                    partitioner_version=current.version,
                    heavy_key_count=len(current.explicit_routes),
                    est_maxload=estimated_loads(current, hist, pcfg).max,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return reports
