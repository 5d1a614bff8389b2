"""kipart command line: simulate, sweep and generate."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import apply_overrides, build_config, config_to_json, load_config
from .errors import ConfigError, KipartError, StreamFormatError
from .metrics import summarize, write_csv, write_summary
from .sim import SimConfig, run_simulation
from .stream import KeyStream, gen_zipf, materialize, save_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

SWEEP_AXES = {
    "partitions": ("partitioner_cfg.num_partitions", int),
    "lambda": ("partitioner_cfg.lambda", int),
    "exponent": ("stream.exponent", float),
}


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _config_from_args(args, extra: Sequence[str] = ()) -> SimConfig:
    overrides = list(args.set or [])
    if getattr(args, "no_history", False):
        overrides.append("history.enabled=false")
    if getattr(args, "replay_model", False):
        overrides.append("replay_model=true")
    if getattr(args, "single_thread", False):
        overrides.append("single_thread=true")
    return load_config(args.config, [*overrides, *extra])


def _histogram_dumper(out_dir: Path):
    hist_dir = out_dir / "histograms"
    hist_dir.mkdir(parents=True, exist_ok=True)

    def dump(t, locals_, hist, _partitioner):
        doc = {
            "batch": t,
            "locals": [h.to_json() for h in locals_],
            "merged": [{"key_hex": k.hex(), "freq": f} for k, f in hist.entries],
        }
        (hist_dir / f"batch_{t:04d}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    return dump


def _run_one(cfg: SimConfig, out_dir: Path, dump_histograms: bool = False, stream: Optional[KeyStream] = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    final = {}

    def observe(t, locals_, hist, partitioner):
        final["p"] = partitioner
        if dump is not None:
            dump(t, locals_, hist, partitioner)

    dump = _histogram_dumper(out_dir) if dump_histograms else None
    reports = run_simulation(cfg, stream=stream, observer=observe)
    summary = summarize(reports, config_to_json(cfg))
    write_csv(reports, out_dir / "metrics.csv", cfg.partitioner_cfg.num_partitions)
    write_summary(summary, out_dir / "summary.json")
    if "p" in final:
        (out_dir / "partitioner.json").write_text(json.dumps(final["p"].to_json()) + "\n", encoding="utf-8")
    return summary


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    summary = _run_one(cfg, Path(args.out), args.dump_histograms)
    print(
        f"{summary.batches} batches: mean imbalance {summary.mean_imbalance}, "
        f"mean migration {summary.mean_migration}"
    )
    return EXIT_OK


def _parse_values(axis: str, raw: str) -> list:
    cast = SWEEP_AXES[axis][1]
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise ConfigError("sweep needs at least one value")
    try:
        return [cast(v) for v in items]
    except ValueError:
        raise ConfigError(f"bad value list {raw!r} for axis {axis}") from None


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return math.fsum(xs) / len(xs) if xs else None


def cmd_sweep(args) -> int:
    values = _parse_values(args.axis, args.values)
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    path, _ = SWEEP_AXES[args.axis]
    base = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    streams: dict[str, KeyStream] = {}
    rows = []
    for value in values:
        doc = apply_overrides(config_to_json(base), [f"{path}={json.dumps(value)}"])
        value_dir = out / f"{args.axis}={value}"
        summaries = []
        for r in range(args.repeats):
            doc["stream"]["seed"] = base.stream.seed + r
            cfg = build_config(doc)
            key = cfg.stream.model_dump_json() + f"|{cfg.batch_size}"
            if key not in streams:
                streams[key] = materialize(cfg.stream, cfg.batch_size)
            summaries.append(_run_one(cfg, value_dir / f"repeat_{r:02d}", args.dump_histograms, streams[key]))
        agg = {
            "value": value,
            "repeats": args.repeats,
            "mean_imbalance": _mean([s.mean_imbalance for s in summaries]),
            "mean_migration": _mean([s.mean_migration for s in summaries]),
            "per_repeat_mean_imbalance": [s.mean_imbalance for s in summaries],
        }
        write_summary(agg, value_dir / "summary.json")
        rows.append(agg)
        print(f"{args.axis}={value}: mean imbalance {agg['mean_imbalance']}, mean migration {agg['mean_migration']}")
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "mean_imbalance", "mean_migration"])
        for row in rows:
            w.writerow([row["value"], repr(row["mean_imbalance"]), repr(row["mean_migration"])])
    write_summary({"axis": args.axis, "values": values, "repeats": args.repeats, "results": rows}, out / "sweep.json")
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    if cfg.stream.source != "zipf":
        raise ConfigError("generate needs stream.source = 'zipf'")
    stream = gen_zipf(cfg.stream, cfg.batch_size)
    save_stream(stream, args.out)
    print(f"wrote {len(stream)} records to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kipart", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kipart {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", "-c", help="JSON config mirroring SimConfig (defaults used if omitted)")
        p.add_argument("--out", "-o", required=True, help=out_help)
        p.add_argument(
            "--set", action="append", metavar="PATH=VALUE",
            help="override a config field by dotted path, e.g. partitioner_cfg.num_partitions=50 (repeatable)",
        )

    def run_flags(p):
        p.add_argument("--no-history", action="store_true", help="use only the fresh histogram each batch")
        p.add_argument("--dump-histograms", action="store_true", help="write per-batch local/merged histograms as JSON")
        p.add_argument("--replay-model", action="store_true",
                       help="batch scenario: decide after a prefix of each batch and charge the replayed prefix as cost")
        p.add_argument("--single-thread", action="store_true", help="process workers sequentially")

    p = sub.add_parser("simulate", help="run one simulation; writes metrics.csv and summary.json")
    common(p, "output directory")
    run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="repeat simulations over one axis; writes sweep.csv")
    common(p, "output directory")
    run_flags(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated axis values, e.g. 10,20,50")
    p.add_argument("--repeats", type=int, default=10, help="runs per value, seeds stream.seed + 0..repeats-1")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("generate", help="write the configured Zipf stream to a text file")
    common(p, "stream file to write")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (ConfigError, StreamFormatError) as exc:
        code = EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_IO
        print(f"kipart: error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"kipart: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KipartError as exc:
        print(f"kipart: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
