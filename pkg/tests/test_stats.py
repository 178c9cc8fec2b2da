from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from pktlat.stats import (LatencyDistribution, LatencySample, StatsError, UrllcRequirement,
                          empirical_cdf, nearest_rank, percentile, percentile_report,
                          read_report_csv, read_two_column_csv, report_row, urllc_check,
                          worst_k, write_report_csv, write_scatter_csv)
from pktlat.timebase import S, us


def dist(lats, tx=None, step=us(100)):
    return LatencyDistribution.from_samples(
        (LatencySample(i * step, lat, i) for i, lat in enumerate(lats)), tx_count=tx)


def test_percentile_nearest_rank():
    xs = list(range(1, 101))
    assert percentile(xs, 50) == 50
    assert percentile(xs, 99) == 99
    assert percentile(xs, 99.9) == 100
    assert percentile(xs, 100) == 100
    assert percentile([7], 0.001) == 7


def test_percentile_empty():
    with pytest.raises(StatsError, match="no samples"):
        percentile([], 50)


def test_nearest_rank_uses_exact_level():
    # 99.999 % of 100000 is exactly rank 99999, no float drift
    assert nearest_rank(99.999, 100_000) == 99_999
    assert nearest_rank(99.99, 10_000) == 9_999
    with pytest.raises(StatsError):
        nearest_rank(0, 10)


def test_distribution_validation():
    with pytest.raises(StatsError):
        dist([1, 2, 3], tx=2)
    with pytest.raises(StatsError):
        dist([-1])
    with pytest.raises(StatsError, match="duplicate"):
        LatencyDistribution.from_samples([LatencySample(0, 1, 5), LatencySample(1, 1, 5)])


def test_report_and_loss():
    d = dist([us(3), us(4), us(5)], tx=4)
    r = percentile_report(d)
    assert d.drops == 1
    assert r.loss_fraction == Fraction(1, 4)
    assert r.loss_percent == 25.0
    assert r.values[0] == us(4)
    assert r.max == us(5)
    assert all(a <= b for a, b in zip(r.values, r.values[1:]))
    assert dist([1, 2]).drops == 0
    assert percentile_report(dist([1, 2])).loss_display() == "-"


def test_urllc_boundary_is_inclusive():
    lats = [us(350)] * 100_000
    ok = percentile_report(dist(lats[:99_999], tx=100_000, step=1))
    assert urllc_check(ok, UrllcRequirement()).compliant
    bad = percentile_report(dist(lats[:99_998], tx=100_000, step=1))
    v = urllc_check(bad, UrllcRequirement())
    assert not v.compliant and "delivery" in str(v)
    slow = percentile_report(dist([us(351)], step=1))
    assert "latency" in str(urllc_check(slow, UrllcRequirement()))


def test_requirement_validation():
    with pytest.raises(StatsError):
        UrllcRequirement(min_delivery=Fraction(0))
    with pytest.raises(StatsError):
        UrllcRequirement(max_latency=0)


def test_cdf_steps():
    cdf = empirical_cdf(dist([5, 1, 5, 3]))
    assert cdf == [(1, 0.25), (3, 0.5), (5, 1.0)]


def test_worst_k_subset_contains_max():
    d = dist([1, 9, 3, 9, 2, 8])
    pts = worst_k(d, 3)
    assert pts == [(us(100), 9), (us(300), 9), (us(500), 8)]
    assert worst_k(d, 2, skip_warmup=us(200)) == [(us(300), 9), (us(500), 8)]
    assert worst_k(d, 3, skip_warmup=S) == []


def test_csv_round_trips(tmp_path):
    d = dist([us("3.1"), us("13.6")], tx=3)
    row = report_row("DPDK-l2fwd", "HW", 10, percentile_report(d))
    write_report_csv(tmp_path / "t.csv", [row])
    back = read_report_csv(tmp_path / "t.csv")[0]
    assert back["loss_pct"] == "33.3" and back["max_us"] == "13.6"
    pts = [(123_456_789, 987_654), (S, us("3.1"))]
    write_scatter_csv(tmp_path / "s.csv", pts)
    assert read_two_column_csv(tmp_path / "s.csv") == pts


def test_arrays_are_int64():
    d = dist([1, 2])
    assert d.latencies.dtype == np.int64 and d.rx_count == 2
