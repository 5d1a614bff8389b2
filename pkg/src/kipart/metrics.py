"""Per-batch load metrics and their CSV / JSON artifacts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

FIXED_COLUMNS = ("batch", "imbalance", "migration", "repartitioned", "version", "heavy_keys", "est_maxload")

SKETCH_NOTE = (
    "heavy hitters come from SpaceSaving-family counters (optionally decayed), "
    "a stand-in for an unpublished counter-based heuristic"
)


def load_imbalance(counts: Sequence[int]) -> float:
    """Max over mean of per-partition counts; 1.0 when nothing was counted."""
    if len(counts) == 0:
        raise ValueError("counts must be non-empty")
    total = sum(counts)
    if total <= 0:
        return 1.0
    return max(counts) * len(counts) / total


@dataclass(frozen=True)
class BatchReport:
    batch_index: int
    per_partition_counts: tuple[int, ...]
    imbalance: float
    migration: float
    repartitioned: bool
    partitioner_version: int
    heavy_key_count: int
    est_maxload: float

    @property
    def degenerate(self) -> bool:
        """True for an empty batch, whose imbalance is defined as 1.0."""
        return sum(self.per_partition_counts) == 0

    @property
    def records(self) -> int:
        return sum(self.per_partition_counts)


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(x))


def write_csv(reports: Sequence[BatchReport], path, num_partitions: Optional[int] = None) -> None:
    if num_partitions is None:
        num_partitions = len(reports[0].per_partition_counts) if reports else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(FIXED_COLUMNS) + [f"n{i}" for i in range(num_partitions)])
        for r in reports:
            w.writerow(
                [
                    r.batch_index,
                    _fmt(r.imbalance),
                    _fmt(r.migration),
                    int(r.repartitioned),
                    r.partitioner_version,
                    r.heavy_key_count,
                    _fmt(r.est_maxload),
                    *r.per_partition_counts,
                ]
            )


def read_csv(path) -> list[BatchReport]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if tuple(header[: len(FIXED_COLUMNS)]) != FIXED_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header {header}")
    out = []
    for row in rows[1:]:
        out.append(
            BatchReport(
                batch_index=int(row[0]),
                imbalance=float(row[1]),
                migration=float(row[2]),
                repartitioned=bool(int(row[3])),
                partitioner_version=int(row[4]),
                heavy_key_count=int(row[5]),
                est_maxload=float(row[6]),
                per_partition_counts=tuple(int(x) for x in row[len(FIXED_COLUMNS) :]),
            )
        )
    return out


def _mean(xs: Sequence[float]) -> Optional[float]:
    return math.fsum(xs) / len(xs) if xs else None


@dataclass
class RunSummary:
    """Aggregates over post-warmup batches; batch 0 (the switch away from
    plain hashing) is reported separately under ``warmup``."""

    batches: int
    mean_imbalance: Optional[float]
    max_imbalance: Optional[float]
    mean_migration: Optional[float]
    repartitions: int
    degenerate_batches: int
    warmup: dict[str, Any]
    config: dict[str, Any] = field(default_factory=dict)
    sketch_substitution: bool = True
    sketch_note: str = SKETCH_NOTE
    sweep: Optional[dict[str, Any]] = None

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def summarize(reports: Sequence[BatchReport], config: Optional[dict] = None) -> RunSummary:
    tail = list(reports[1:])
    warmup = (
        {"batch": 0, "imbalance": reports[0].imbalance, "migration": reports[0].migration}
        if reports
        else {}
    )
    return RunSummary(
        batches=len(reports),
        mean_imbalance=_mean([r.imbalance for r in tail]),
        max_imbalance=max((r.imbalance for r in tail), default=None),
        mean_migration=_mean([r.migration for r in tail]),
        repartitions=sum(r.repartitioned for r in reports),
        degenerate_batches=sum(r.degenerate for r in reports),
        warmup=warmup,
        config=dict(config or {}),
    )


def write_summary(summary: RunSummary | dict, path) -> None:
    doc = summary.to_json() if isinstance(summary, RunSummary) else summary
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
