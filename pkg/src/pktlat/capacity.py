"""Overload prediction from medians and interrupt costs.

``t_e2e = t_cpu + 2 t_transfer`` and ``R_max = (1 s - d_sigma) / t_cpu``.
All arithmetic is exact (integer ps and Fractions); rounding happens only in
:func:`format_kpps` and :func:`~pktlat.timebase.format_us`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .timebase import S, as_fraction, format_us, round_div, us

CAPACITY_HEADER = ["scenario", "mode", "transfer2_us", "median_e2e_us", "tcpu_us", "dsigma_us", "rmax_kpps"]

# (rate Hz, delay) pairs per mode
HW_INTERRUPT_TABLE = ((Fraction("166.7"), us("10.9")), (Fraction("83.3"), us("13.6")))
VM_INTERRUPT_TABLE = ((Fraction("166.7"), us("17.5")), (Fraction("83.3"), us("19.2")),
                      (Fraction(250), us("17.5")))

# measured medians at 10 kpps
L2FWD_MEDIANS = {"HW": us("3.1"), "VM": us("3.3")}
APP_MEDIANS = {
    ("Snort-fwd", "HW"): us("14.5"),
    ("Snort-fwd", "VM"): us("15.9"),
    ("Snort-filter", "HW"): us("17.4"),
    ("Snort-filter", "VM"): us("18.4"),
}


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class CapacityInputs:
    median_app_e2e: int
    median_l2fwd_e2e: int
    interrupt_table: tuple[tuple[Fraction, int], ...]

    def __post_init__(self):
        if self.median_app_e2e < self.median_l2fwd_e2e:
            raise CapacityError("transfer exceeds total: application median below l2fwd median")
        for rate, delay in self.interrupt_table:
            if as_fraction(rate) <= 0 or delay < 0:
                raise CapacityError(f"invalid interrupt entry ({rate}, {delay})")


@dataclass(frozen=True)
class CapacityResult:
    t_cpu: int
    d_sigma: int
    r_max: Fraction  # packets/s

    @property
    def r_max_kpps(self) -> float:
        return float(self.r_max / 1000)


def estimate_tcpu(median_app: int, median_l2fwd: int) -> int:
    if median_app < median_l2fwd:
        raise CapacityError("transfer exceeds total")
    return median_app - median_l2fwd


def e2e_delay(t_cpu: int, t_transfer: int) -> int:
    if t_cpu < 0 or t_transfer < 0:
        raise CapacityError("delays must not be negative")
    return t_cpu + 2 * t_transfer


def interrupt_budget_exact(table: Iterable[tuple[Fraction | float, int]]) -> Fraction:
    total = sum((as_fraction(r) * d for r, d in table), Fraction(0))
    if total >= S:
        raise CapacityError("interrupts saturate CPU")
    return total


def interrupt_budget(table: Iterable[tuple[Fraction | float, int]]) -> int:
    """Interrupt busy time per second of wall clock, in ps."""
    total = interrupt_budget_exact(table)
    return round_div(total.numerator, total.denominator)


def max_rate(t_cpu: int, d_sigma: int | Fraction) -> Fraction:
    if t_cpu <= 0:
        raise CapacityError("t_cpu must be positive to bound the packet rate")
    if d_sigma >= S:
        raise CapacityError("interrupts saturate CPU")
    return Fraction(S - d_sigma) / t_cpu


def capacity(inputs: CapacityInputs) -> CapacityResult:
    t_cpu = estimate_tcpu(inputs.median_app_e2e, inputs.median_l2fwd_e2e)
    d_sigma = interrupt_budget(inputs.interrupt_table)
    return CapacityResult(t_cpu, d_sigma, max_rate(t_cpu, d_sigma))


def predict_overload(offered_rate: Fraction | float, result: CapacityResult) -> str:
    """``"overload_predicted"`` iff the offered rate exceeds ``r_max``.

    The model ignores that interrupts and packets share pipeline overlap, so
    it errs low: a system may survive somewhat above ``r_max``.
    """
    return "overload_predicted" if as_fraction(offered_rate) > result.r_max else "safe"


def format_kpps(rate: Fraction) -> str:
    tenths = rate / 100
    return f"{round_div(tenths.numerator, tenths.denominator) / 10:.1f}"


@dataclass(frozen=True)
class CapacityRow:
    scenario: str
    mode: str
    inputs: CapacityInputs
    result: CapacityResult

    def cells(self) -> list[str]:
        r = self.result
        return [self.scenario, self.mode, format_us(self.inputs.median_l2fwd_e2e),
                format_us(self.inputs.median_app_e2e), format_us(r.t_cpu),
                format_us(r.d_sigma), format_kpps(r.r_max)]


def published_rows() -> list[CapacityRow]:
    """The four application/mode rows from the published medians and interrupt table."""
    rows = []
    for (scenario, mode), median in APP_MEDIANS.items():
        table = HW_INTERRUPT_TABLE if mode == "HW" else VM_INTERRUPT_TABLE
        inputs = CapacityInputs(median, L2FWD_MEDIANS[mode], table)
        rows.append(CapacityRow(scenario, mode, inputs, capacity(inputs)))
    return rows


def write_capacity_csv(path: str | Path, rows: Sequence[CapacityRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CAPACITY_HEADER)
        for row in rows:
            w.writerow(row.cells())
