import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stool.backends import CostModel, build_scripted_backend
from stool.errors import EmptyHeads, EmptySamples, MissingBaselineBatch, ZeroBottleneck
from stool.metrics import (
    REFERENCE_BATCHES,
    LatencyModel,
    batch_efficiency,
    combined_speedup,
    compression_ratio,
    compression_report,
    latency_baseline,
    latency_parallel,
    nearest_rank,
    percentile_stats,
    roofline_times,
    speedup,
)
from stool.scheduler import FUNCTION_HEADS, generate_parallel, generate_sequential_baseline


def test_latency_baseline_examples():
    m = LatencyModel(10, 1, 1.0)
    assert latency_baseline(m, 36) == 46
    assert latency_baseline(m, 0) == 10
    with pytest.raises(ValueError):
        latency_baseline(m, -1)


def test_latency_parallel_examples():
    ns = (6, 3, 1, 1, 1, 1, 1)
    assert latency_parallel(LatencyModel(10, 1, 1.0), ns) == 16
    assert latency_parallel(LatencyModel(10, 1, 1.082), ns) == pytest.approx(16.492, abs=1e-12)
    with pytest.raises(EmptyHeads):
        latency_parallel(LatencyModel(10, 1), [])


def test_latency_model_validation():
    for args in ((-1, 1), (0, 0), (0, 1, 0.9)):
        with pytest.raises(ValueError):
            LatencyModel(*args)


def test_cross_check_against_simulator(tok):
    P = list(range(1, 41))
    script = [(P, None, list(b"z" * 35))]
    lengths = dict(zip(FUNCTION_HEADS, (6, 3, 1, 1, 1, 1, 1)))
    for h, n in lengths.items():
        target = [tok.table.null_id] if n == 1 else list(b"v" * (n - 1)) + [tok.table.close_id(h)]
        script.append((P, tok.table.open_id(h), target))
    b = build_scripted_backend(script, tok)
    cost = CostModel(t_prefill_per_token=0.25)
    _, bt = generate_sequential_baseline(b, P, tok, cost=cost)
    _, pt = generate_parallel(b, P, tok, cost=cost)
    m = LatencyModel(10.0, 1.0, 1.0)
    assert bt.total_time == pytest.approx(latency_baseline(m, bt.N), rel=1e-9)
    assert pt.total_time == pytest.approx(latency_parallel(m, pt.N_i.values()), rel=1e-9)
    assert bt.total_time / pt.total_time == pytest.approx(speedup(m, bt.N, pt.N_i.values()), rel=1e-9)


def test_compression_ratio_examples():
    assert compression_ratio(44.1, 8.7) == pytest.approx(5.0689655, abs=1e-6)
    assert compression_ratio(36, 6) == 6.0
    assert compression_ratio(7, 7) == 1.0
    with pytest.raises(ZeroBottleneck):
        compression_ratio(10, 0)


@given(st.integers(1, 1000), st.integers(1, 999))
def test_compression_ratio_decreasing(base, s):
    assert compression_ratio(base, s) > compression_ratio(base, s + 1)


def test_combined_speedup():
    assert combined_speedup(4.5, 3.24) == pytest.approx(14.58, abs=1e-9)
    assert combined_speedup(1, 3.24) == 3.24
    assert combined_speedup(1, 1) == 1
    with pytest.raises(ValueError):
        combined_speedup(0, 2)


def test_nearest_rank_examples():
    xs = list(range(1, 101))
    assert nearest_rank(xs, 50) == 50
    assert nearest_rank(xs, 90) == 90
    assert nearest_rank(xs, 99) == 99
    assert nearest_rank(xs, 100) == 100
    s = percentile_stats([7.5])
    assert s.P50 == s.P90 == s.P95 == s.P99 == s.mean == 7.5
    with pytest.raises(EmptySamples):
        percentile_stats([])
    with pytest.raises(ValueError):
        nearest_rank(xs, 0)


def test_nearest_rank_small_n():
    # ceil(0.9 * 10) = 9, ceil(0.5 * 3) = 2
    assert nearest_rank(list(range(10)), 90) == 8
    assert nearest_rank([1, 2, 3], 50) == 2


def test_tail_ratio():
    s = percentile_stats([51.0] * 50 + [74.5] * 50)
    assert s.P50 == 51.0 and s.P90 == 74.5
    assert s.tail_ratio == pytest.approx(1.4608, abs=1e-4)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=80), st.randoms())
def test_percentiles_monotone_and_permutation_invariant(xs, rnd):
    s = percentile_stats(xs)
    assert s.P50 <= s.P90 <= s.P95 <= s.P99
    ys = list(xs)
    rnd.shuffle(ys)
    assert percentile_stats(ys) == s


def test_compression_report_both_ways():
    rep = compression_report([("a", 10, 2), ("b", 30, 10), ("c", 8, 4)])
    assert rep.count == 3
    assert rep.cr["mean_of_ratios"] == pytest.approx((5 + 3 + 2) / 3)
    assert rep.cr["ratio_of_means"] == pytest.approx(16 / (16 / 3))
    assert rep.cr["P50"] == 10 / 4
    assert rep.cr["P90"] == 30 / 10
    assert compression_report([]).count == 0


def test_efficiency_examples():
    cost = CostModel(t_mem=1.0, t_compute_per_seq=0.05)
    eff = batch_efficiency(roofline_times(cost, REFERENCE_BATCHES))
    assert eff.batch_sizes == list(REFERENCE_BATCHES)
    e = dict(zip(eff.batch_sizes, eff.efficiency))
    assert [e[b] for b in (1, 2, 4, 8, 16)] == [1.0] * 5
    assert e[32] == pytest.approx(0.625, abs=1e-9)
    assert e[128] == pytest.approx(0.15625, abs=1e-9)
    o = dict(zip(eff.batch_sizes, eff.overhead))
    assert o[8] == 0.0 and o[32] == pytest.approx(0.6)
    assert len(eff.rows()) == 8


def test_efficiency_needs_b1():
    with pytest.raises(MissingBaselineBatch):
        batch_efficiency({2: 1.0})
    with pytest.raises(ValueError):
        batch_efficiency({1: 0.0})


@given(st.floats(0.1, 5), st.floats(0.001, 0.5))
def test_efficiency_shape(t_mem, t_comp):
    cost = CostModel(t_mem=t_mem, t_compute_per_seq=t_comp)
    batches = [1] + sorted(random.Random(0).sample(range(2, 400), 20))
    eff = batch_efficiency(roofline_times(cost, batches))
    assert eff.efficiency[0] == 1.0
    for b, e in zip(eff.batch_sizes, eff.efficiency):
        if b * t_comp <= t_mem:
            assert e == 1.0
    assert all(x >= y for x, y in zip(eff.efficiency, eff.efficiency[1:]))
    beyond = [e for b, e in zip(eff.batch_sizes, eff.efficiency) if b * t_comp > max(t_mem, t_comp)]
    assert all(x > y for x, y in zip(beyond, beyond[1:]))


def test_nearest_rank_exact_boundary():
    # 28% of 25 is exactly rank 7; float arithmetic tends to push this to 8
    assert nearest_rank(list(range(25)), 28) == 6
    assert nearest_rank(list(range(50)), 14) == 6
