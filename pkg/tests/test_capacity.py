from __future__ import annotations

from fractions import Fraction

import pytest

from pktlat.capacity import (HW_INTERRUPT_TABLE, VM_INTERRUPT_TABLE, CapacityError, CapacityInputs,
                             capacity, e2e_delay, estimate_tcpu, format_kpps, interrupt_budget,
                             max_rate, published_rows, predict_overload, write_capacity_csv)
from pktlat.timebase import S, format_us, us


def test_estimate_tcpu():
    assert estimate_tcpu(us("14.5"), us("3.1")) == us("11.4")
    assert estimate_tcpu(us("18.4"), us("3.3")) == us("15.1")
    assert estimate_tcpu(us(5), us(5)) == 0
    with pytest.raises(CapacityError, match="transfer exceeds total"):
        estimate_tcpu(us(3), us(4))


def test_e2e_delay():
    assert e2e_delay(us("11.4"), us("1.55")) == us("14.5")
    assert e2e_delay(us("14.3"), us("1.55")) == us("17.4")
    assert e2e_delay(0, us(7)) == us(14)


def test_interrupt_budget():
    assert format_us(interrupt_budget(HW_INTERRUPT_TABLE)) == "2949.9"
    assert format_us(interrupt_budget(VM_INTERRUPT_TABLE)) == "8891.6"
    assert interrupt_budget([]) == 0
    with pytest.raises(CapacityError, match="saturate"):
        interrupt_budget([(Fraction(1000), us(1000))])


def test_max_rate():
    assert format_kpps(max_rate(us("15.1"), us("8891.6"))) == "65.6"
    assert max_rate(us(1), 0) == 1_000_000
    with pytest.raises(CapacityError):
        max_rate(0, 0)


def test_predict_overload():
    rows = {(r.scenario, r.mode): r.result for r in published_rows()}
    assert predict_overload(90_000, rows["Snort-fwd", "HW"]) == "overload_predicted"
    # the VM forwarder survived 80 kpps in measurement; the model is conservative
    assert predict_overload(80_000, rows["Snort-fwd", "VM"]) == "overload_predicted"
    assert predict_overload(0, rows["Snort-fwd", "HW"]) == "safe"


def test_monotone_in_inputs():
    assert max_rate(us(10), us(100)) > max_rate(us(11), us(100)) > max_rate(us(11), us(200))


def test_inputs_validation():
    with pytest.raises(CapacityError):
        CapacityInputs(us(1), us(2), ())
    with pytest.raises(CapacityError):
        CapacityInputs(us(2), us(1), ((0, us(1)),))


def test_custom_table_hand_arithmetic():
    # 100 Hz x 50 us + 10 Hz x 100 us = 6000 us per second
    inputs = CapacityInputs(us(12), us(2), ((Fraction(100), us(50)), (Fraction(10), us(100))))
    res = capacity(inputs)
    assert res.d_sigma == us(6000)
    assert res.r_max == Fraction(S - us(6000), us(10))
    assert res.r_max_kpps == pytest.approx(99.4)


def test_csv(tmp_path):
    write_capacity_csv(tmp_path / "c.csv", published_rows())
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "scenario,mode,transfer2_us,median_e2e_us,tcpu_us,dsigma_us,rmax_kpps"
    assert lines[4] == "Snort-filter,VM,3.3,18.4,15.1,8891.6,65.6"
