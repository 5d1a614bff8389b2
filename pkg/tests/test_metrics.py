import csv
import json
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kipart.metrics import FIXED_COLUMNS, BatchReport, load_imbalance, read_csv, summarize, write_csv, write_summary
from kipart.sim import SimConfig, run_simulation


def test_balanced():
    assert load_imbalance([10, 10, 10, 10]) == 1.0


def test_skewed():
    assert load_imbalance([30, 10, 10, 10]) == 2.0


def test_empty_counts_degenerate():
    assert load_imbalance([0, 0, 0]) == 1.0
    r = BatchReport(0, (0, 0), 1.0, 0.0, False, 0, 0, 0.5)
    assert r.degenerate


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=50))
def test_imbalance_brute_force(counts):
    got = load_imbalance(counts)
    if sum(counts) == 0:
        assert got == 1.0
    else:
        assert got == pytest.approx(max(counts) / (sum(counts) / len(counts)))
        assert got >= 1.0 - 1e-12


def test_empty_csv_is_header_only(tmp_path):
    p = tmp_path / "m.csv"
    write_csv([], p, num_partitions=3)
    assert p.read_text() == ",".join(FIXED_COLUMNS) + ",n0,n1,n2\n"
    assert read_csv(p) == []


def test_one_batch_round_trip(tmp_path):
    cfg = SimConfig.model_validate({
        "stream": {"total_records": 500, "distinct_keys": 50, "seed": 1},
        "partitioner_cfg": {"num_partitions": 3, "num_hosts": 30},
        "batch_size": 500,
    })
    reports = run_simulation(cfg)
    p = tmp_path / "m.csv"
    write_csv(reports, p)
    assert len(p.read_text().splitlines()) == 2
    assert read_csv(p) == reports


def test_floats_round_trip_exactly(tmp_path):
    rnd = random.Random(0)
    reports = [
        BatchReport(i, (rnd.randrange(100), rnd.randrange(100)), 1 + rnd.random() / 3, rnd.random() / 7,
                    bool(i % 2), i, rnd.randrange(9), rnd.random() / 11)
        for i in range(30)
    ]
    p = tmp_path / "m.csv"
    write_csv(reports, p)
    assert read_csv(p) == reports


def test_summary_mean_matches_csv(tmp_path):
    cfg = SimConfig.model_validate({
        "stream": {"total_records": 6000, "distinct_keys": 400, "exponent": 1.3, "seed": 2},
        "partitioner_cfg": {"num_partitions": 4, "num_hosts": 40},
        "batch_size": 1000,
    })
    reports = run_simulation(cfg)
    write_csv(reports, tmp_path / "m.csv")
    with open(tmp_path / "m.csv") as fh:
        rows = list(csv.DictReader(fh))
    s = summarize(reports)
    tail = [float(r["imbalance"]) for r in rows[1:]]
    assert s.mean_imbalance == pytest.approx(sum(tail) / len(tail), rel=1e-12)
    assert s.mean_migration == pytest.approx(sum(float(r["migration"]) for r in rows[1:]) / len(tail), rel=1e-12)
    assert s.max_imbalance == max(tail)
    assert s.warmup["imbalance"] == float(rows[0]["imbalance"])
    assert s.repartitions == sum(int(r["repartitioned"]) for r in rows)


def test_summary_json_stable(tmp_path):
    s = summarize([BatchReport(0, (1, 1), 1.0, 0.0, True, 1, 0, 0.5)], {"b": 1, "a": 2})
    write_summary(s, tmp_path / "a.json")
    write_summary(s, tmp_path / "b.json")
    text = (tmp_path / "a.json").read_text()
    assert text == (tmp_path / "b.json").read_text()
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
    assert doc["mean_imbalance"] is None and doc["sketch_substitution"] is True
