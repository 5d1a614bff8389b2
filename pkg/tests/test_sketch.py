import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kipart.errors import EmptyInput
from kipart.partitioner import Histogram
from kipart.sketch import (
    FrequencySketch,
    HistogramHistory,
    LocalHistogram,
    blend,
    decay_sketch,
    local_top,
    merge,
    offer,
)


def zipf_ids(rng, n, distinct, s):
    w = np.arange(1, distinct + 1, dtype=float) ** -s
    return rng.choice(distinct, size=n, p=w / w.sum())


def feed(sketch, keys):
    for k in keys:
        offer(sketch, k)


# -- offer -------------------------------------------------------------------


def test_under_capacity_exact():
    sk = FrequencySketch(10)
    feed(sk, [b"a", b"b", b"c", b"d", b"e"])
    assert sk.counters() == {k: (1.0, 0.0) for k in [b"a", b"b", b"c", b"d", b"e"]}
    assert sk.total_weight == 5


@pytest.mark.parametrize("variant", ["space_saving", "decayed", "lossy_counting"])
def test_single_key_stream(variant):
    sk = FrequencySketch(4, variant)
    feed(sk, [b"only"] * 37)
    assert sk.estimate(b"only") == 37
    assert sk.total_weight == 37


def test_eviction_inherits_min_count():
    sk = FrequencySketch(3)
    feed(sk, [b"a", b"b", b"a", b"c", b"d"])
    # b and c tie at 1; b sits in the earlier slot and is evicted
    assert sk.counters() == {b"a": (2.0, 0.0), b"d": (2.0, 1.0), b"c": (1.0, 0.0)}


def test_offer_ids_matches_offer():
    rng = np.random.default_rng(4)
    keys = [b"k%d" % i for i in range(300)]
    ids = zipf_ids(rng, 20_000, 300, 1.1)
    a = FrequencySketch(25, keys=keys)
    a.offer_ids(ids)
    b = FrequencySketch(25)
    feed(b, [keys[i] for i in ids])
    assert a.counters() == b.counters()


def test_capacity_bound_holds():
    rng = np.random.default_rng(1)
    sk = FrequencySketch(17)
    sk.offer_ids(rng.integers(0, 5000, 30_000))
    assert len(sk) == 17


@pytest.mark.parametrize("seed", range(8))
def test_space_saving_guarantee(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1_000, 100_001))
    m = int(rng.integers(5, 300))
    ids = zipf_ids(rng, n, int(rng.integers(50, 20_000)), float(rng.uniform(0.5, 2.0)))
    keys = [b"%d" % i for i in range(int(ids.max()) + 1)]
    sk = FrequencySketch(m, keys=keys)
    sk.offer_ids(ids)
    truth = Counter(ids.tolist())
    tracked = sk.counters()
    for k, c in truth.items():
        if c > n / m:
            assert keys[k] in tracked
    for key, (est, err) in tracked.items():
        true = truth[int(key)]
        assert true <= est <= true + n / m
        assert est - err <= true


def test_lossy_counting_guarantee():
    rng = np.random.default_rng(7)
    n, cap = 50_000, 200
    ids = zipf_ids(rng, n, 3000, 1.2)
    keys = [b"%d" % i for i in range(3000)]
    sk = FrequencySketch(cap, "lossy_counting", keys=keys)
    sk.offer_ids(ids)
    truth = Counter(ids.tolist())
    tracked = sk.counters()
    for k, c in truth.items():
        if c > n / cap:
            assert keys[k] in tracked
    for key, (est, _) in tracked.items():
        assert truth[int(key)] - n / cap <= est <= truth[int(key)]


# -- local_top ---------------------------------------------------------------


def test_local_top_empty():
    assert local_top(FrequencySketch(5), 3).entries == ()


def test_local_top_all_when_b_large():
    sk = FrequencySketch(10)
    feed(sk, [b"x", b"y", b"x"])
    assert local_top(sk, 50).entries == ((b"x", 2.0), (b"y", 1.0))


def test_local_top_ties_by_key_bytes():
    sk = FrequencySketch(10)
    feed(sk, [b"c", b"a", b"b", b"a", b"b", b"c"])
    assert [k for k, _ in local_top(sk, 2).entries] == [b"a", b"b"]


def test_local_top_exact_regime_matches_exact_counter():
    rng = random.Random(3)
    stream = [b"%d" % int(rng.paretovariate(1.0)) for _ in range(5000)]
    truth = Counter(stream)
    sk = FrequencySketch(len(truth) + 5)
    feed(sk, stream)
    expected = sorted(truth.items(), key=lambda kv: (-kv[1], kv[0]))[:3]
    assert list(local_top(sk, 3).entries) == [(k, float(c)) for k, c in expected]


def test_local_top_deterministic():
    rng = np.random.default_rng(0)
    ids = zipf_ids(rng, 10_000, 1000, 1.0)
    keys = [b"%d" % i for i in range(1000)]
    tops = []
    for _ in range(2):
        sk = FrequencySketch(50, keys=keys)
        sk.offer_ids(ids)
        tops.append(sk.local_top(20))
    assert tops[0] == tops[1]


def test_local_histogram_json_round_trip():
    h = LocalHistogram(3, ((b"\x00a", 4.5), (b"b", 1.0)), 10.0)
    assert LocalHistogram.from_json(h.to_json()) == h


# -- merge -------------------------------------------------------------------


def test_merge_single_local():
    h = merge([LocalHistogram(0, ((b"k1", 60.0), (b"k2", 40.0)), 200.0)], 2)
    assert h.entries == ((b"k1", 0.30), (b"k2", 0.20))


def test_merge_disjoint_locals():
    a = LocalHistogram(0, ((b"a", 30.0), (b"b", 10.0)), 100.0)
    b = LocalHistogram(1, ((b"c", 20.0),), 100.0)
    assert merge([a, b], 3).entries == ((b"a", 0.15), (b"c", 0.10), (b"b", 0.05))


def test_merge_empty_input():
    with pytest.raises(EmptyInput):
        merge([], 3)
    with pytest.raises(EmptyInput):
        merge([LocalHistogram(0, (), 0.0)], 3)


def test_merge_exact_regime_equals_global_top():
    rng = np.random.default_rng(11)
    ids = zipf_ids(rng, 10_000, 100, 1.0)
    keys = [b"key%03d" % i for i in range(100)]
    sketches = [FrequencySketch(100, keys=keys) for _ in range(4)]
    for w, sk in enumerate(sketches):
        sk.offer_ids(ids[w::4])
    merged = merge([sk.local_top(100, w) for w, sk in enumerate(sketches)], 10)
    truth = Counter(ids.tolist())
    expected = sorted(((keys[k], c / 10_000) for k, c in truth.items()), key=lambda kv: (-kv[1], kv[0]))[:10]
    assert merged.keys() == [k for k, _ in expected]
    assert [f for _, f in merged.entries] == pytest.approx([f for _, f in expected], abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.tuples(st.sampled_from([b"a", b"b", b"c", b"d", b"e"]), st.floats(0.1, 50.0)),
                         max_size=5, unique_by=lambda kc: kc[0]), min_size=1, max_size=5),
       st.randoms())
def test_merge_order_independent(locals_spec, rnd):
    locals_ = [LocalHistogram(i, tuple(e), sum(c for _, c in e) + 1.0) for i, e in enumerate(locals_spec)]
    shuffled = locals_[:]
    rnd.shuffle(shuffled)
    a, b = merge(locals_, 4), merge(shuffled, 4)
    assert a == b
    assert a.total <= 1.0 + 1e-12


def test_merge_normalization_equals_one_when_covered():
    a = LocalHistogram(0, ((b"a", 3.0), (b"b", 1.0)), 4.0)
    b = LocalHistogram(1, ((b"a", 2.0), (b"c", 2.0)), 4.0)
    assert merge([a, b], 3).total == pytest.approx(1.0)
    assert merge([a, b], 2).total < 1.0


# -- blend -------------------------------------------------------------------


def H(*entries, cap=4):
    return Histogram(tuple(entries), cap)


def test_blend_empty_history_returns_fresh():
    fresh = H((b"a", 0.4), (b"b", 0.1))
    assert blend(HistogramHistory(5, 0.5), fresh) is fresh


def test_blend_fixed_point():
    hist = HistogramHistory(window=2, gamma=1.0)
    h = H((b"a", 0.4), (b"b", 0.1))
    blend(hist, h)
    out = blend(hist, h)
    assert out.keys() == h.keys()
    assert [f for _, f in out.entries] == pytest.approx([0.4, 0.1])


def test_blend_weighted_average():
    hist = HistogramHistory(window=5, gamma=0.5)
    old = H((b"s", 0.3), (b"x", 0.2))
    new = H((b"y", 0.25), (b"s", 0.1))
    blend(hist, old)
    out = blend(hist, new).as_dict()
    assert out[b"s"] == pytest.approx((0.1 + 0.5 * 0.3) / 1.5)
    assert out[b"y"] == pytest.approx(0.25 / 1.5)
    assert out[b"x"] == pytest.approx(0.5 * 0.2 / 1.5)


def test_blend_window_bounded():
    hist = HistogramHistory(window=3, gamma=0.5)
    for i in range(10):
        blend(hist, H((b"k%d" % i, 0.1)))
    assert len(hist) == 3
    assert len(blend(hist, H((b"z", 0.2)))) <= 4


# -- decay -------------------------------------------------------------------


def test_decay_alpha_one_is_noop():
    sk = FrequencySketch(5, "decayed")
    feed(sk, [b"a", b"a", b"b"])
    before = sk.counters()
    decay_sketch(sk, 1.0)
    assert sk.counters() == before


def test_decay_halves():
    sk = FrequencySketch(5, "decayed")
    feed(sk, [b"a"] * 4 + [b"b"] * 2)
    decay_sketch(sk, 0.5)
    assert {k: c for k, (c, _) in sk.counters().items()} == {b"a": 2.0, b"b": 1.0}
    assert sk.total_weight == 3.0


def test_decay_ignored_for_other_variants():
    sk = FrequencySketch(5, "space_saving")
    feed(sk, [b"a"] * 4)
    decay_sketch(sk, 0.5)
    assert sk.estimate(b"a") == 4.0


@pytest.mark.parametrize("seed", range(10))
def test_decay_preserves_top_order(seed):
    rng = np.random.default_rng(seed)
    keys = [b"%04d" % i for i in range(500)]
    sk = FrequencySketch(40, "decayed", keys=keys)
    sk.offer_ids(zipf_ids(rng, 5000, 500, 1.1))
    before = [k for k, _ in sk.local_top(15).entries]
    decay_sketch(sk, float(rng.uniform(0.05, 1.0)))
    assert [k for k, _ in sk.local_top(15).entries] == before


def test_decayed_sketch_keeps_working_after_decay():
    sk = FrequencySketch(3, "decayed")
    feed(sk, [b"a"] * 8 + [b"b"] * 4 + [b"c"] * 2)
    decay_sketch(sk, 0.5)
    feed(sk, [b"d"])
    # d evicts the smallest counter (c at 1.0) and inherits it
    assert sk.counters()[b"d"] == (2.0, 1.0)
    assert len(sk) == 3
