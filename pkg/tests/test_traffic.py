from __future__ import annotations

from fractions import Fraction

import pytest

from pktlat.timebase import S, us
from pktlat.traffic import (ArrivalSequence, TrafficError, TrafficSpec, generate, generate_cbr,
                            read_arrivals_csv, write_arrivals_csv)


def test_cbr_spacing_and_count():
    seq = generate_cbr(TrafficSpec(rate=10_000, duration=S))
    assert len(seq) == 10_000
    assert seq.times[:3] == [0, us(100), us(200)]
    assert list(seq.counters)[-1] == 9_999


def test_cbr_fractional_period_rounds_exactly():
    seq = generate_cbr(TrafficSpec(rate=3, duration=S))
    assert seq.times == [0, 333_333_333_333, 666_666_666_667]


def test_bursty_back_to_back():
    spec = TrafficSpec(rate=10_000, duration=S // 100, burst_size=4)
    seq = generate(spec)
    assert spec.wire_time == 67_200
    assert seq.times[:5] == [0, 67_200, 134_400, 201_600, us(400)]
    assert len(seq) == 100


def test_partial_last_burst_keeps_average_rate():
    seq = generate(TrafficSpec(rate=1000, duration=S // 100, burst_size=3))
    assert len(seq) == 10


def test_burst_exceeding_period():
    with pytest.raises(TrafficError, match="burst exceeds period"):
        generate(TrafficSpec(rate=20_000_000, duration=S // 1000, burst_size=64))


@pytest.mark.parametrize("kw", [dict(rate=0), dict(rate=-1), dict(rate=1, burst_size=0),
                                dict(rate=1, frame_size=60)])
def test_spec_validation(kw):
    with pytest.raises(TrafficError):
        TrafficSpec(duration=S, **kw)


def test_sequence_must_increase():
    with pytest.raises(TrafficError):
        ArrivalSequence([0, 5, 5])


def test_csv_round_trip(tmp_path):
    seq = generate(TrafficSpec(rate=Fraction(7, 3), duration=10 * S))
    write_arrivals_csv(tmp_path / "a.csv", seq)
    assert read_arrivals_csv(tmp_path / "a.csv") == seq


def test_csv_rejects_gap(tmp_path):
    (tmp_path / "a.csv").write_text("counter,time_ps\n0,0\n2,5\n")
    with pytest.raises(TrafficError, match=":3:"):
        read_arrivals_csv(tmp_path / "a.csv")
