"""Key Isolator Partitioner with heavy-hitter histograms and a drift simulator."""

__version__ = "0.1.0"

from .errors import ConfigError, ConfigMismatch, EmptyInput, StreamFormatError
from .hashing import murmur3_64, uniform_hash
from .metrics import BatchReport, RunSummary, load_imbalance, read_csv, summarize, write_csv, write_summary
from .partitioner import (
    Histogram,
    KeyIsolatorPartitioner,
    LoadVector,
    PartitionerConfig,
    WeightedHashPartitioner,
    estimated_loads,
    kip_update,
    kip_update_traced,
    migration_fraction,
)
from .sim import GateSpec, SimConfig, SlidingState, gate_decide, run_simulation
from .sketch import (
    FrequencySketch,
    HistogramHistory,
    HistorySpec,
    LocalHistogram,
    SketchSpec,
    blend,
    decay_sketch,
    local_top,
    merge,
    offer,
)
from .stream import DriftSpec, KeyStream, KeyTable, StreamSpec, gen_zipf, load_stream, save_stream

__all__ = [name for name in dir() if not name.startswith("_")]
