"""Latency samples and the reports computed from them.

Percentiles are nearest-rank: the value at 1-based index ``ceil(p/100 * n)``
of the ascending sort, so every reported number is an observed latency.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .timebase import S, US, as_fraction, format_us, seconds, us

TABLE_LEVELS: tuple[float, ...] = (50, 99, 99.9, 99.99, 99.999)
REPORT_HEADER = [
    "scenario", "mode", "rate_kpps", "loss_pct",
    "p50_us", "p99_us", "p99.9_us", "p99.99_us", "p99.999_us", "max_us",
]


class StatsError(ValueError):
    pass


class LatencySample(NamedTuple):
    send_time: int
    latency: int
    counter: int


@dataclass(frozen=True, eq=False)
class LatencyDistribution:
    """Per-packet (send time, latency) samples plus transmit accounting.

    The three arrays are parallel and ordered by send time. ``epoch`` is the
    reference instant for warm-up exclusion (first transmit timestamp for
    traces, 0 for simulations).
    """

    send_times: np.ndarray
    latencies: np.ndarray
    counters: np.ndarray
    tx_count: int
    epoch: int = 0

    def __post_init__(self):
        n = len(self.latencies)
        if len(self.send_times) != n or len(self.counters) != n:
            raise StatsError("sample arrays differ in length")
        if n > self.tx_count:
            raise StatsError(f"rx_count {n} exceeds tx_count {self.tx_count}")
        if n and int(self.latencies.min()) < 0:
            raise StatsError("negative latency in distribution")

    @classmethod
    def from_samples(cls, samples: Iterable[LatencySample], tx_count: int | None = None,
                     epoch: int = 0) -> LatencyDistribution:
        rows = sorted(samples, key=lambda s: (s.send_time, s.counter))
        send = np.array([s.send_time for s in rows], dtype=np.int64)
        lat = np.array([s.latency for s in rows], dtype=np.int64)
        cnt = np.array([s.counter for s in rows], dtype=np.int64)
        if len(set(cnt.tolist())) != len(cnt):
            raise StatsError("duplicate counters in distribution")
        return cls(send, lat, cnt, len(rows) if tx_count is None else tx_count, epoch)

    @property
    def rx_count(self) -> int:
        return len(self.latencies)

    @property
    def drops(self) -> int:
        return self.tx_count - self.rx_count

    @property
    def samples(self) -> list[LatencySample]:
        return list(iter(self))

    def __iter__(self) -> Iterator[LatencySample]:
        for t, lat, c in zip(self.send_times.tolist(), self.latencies.tolist(),
                             self.counters.tolist()):
            yield LatencySample(t, lat, c)

    def __len__(self) -> int:
        return self.rx_count

    def sorted_latencies(self) -> np.ndarray:
        return np.sort(self.latencies, kind="stable")


@dataclass(frozen=True)
class PercentileReport:
    levels: tuple[float, ...]
    values: tuple[int, ...]
    max: int
    tx_count: int
    rx_count: int

    def __post_init__(self):
        if list(self.values) != sorted(self.values):
            raise StatsError("percentile values must be non-decreasing")
        if any(v > self.max for v in self.values):
            raise StatsError("max below a percentile value")

    @property
    def loss_fraction(self) -> Fraction:
        if self.tx_count == 0:
            return Fraction(0)
        return Fraction(self.tx_count - self.rx_count, self.tx_count)

    @property
    def delivery(self) -> Fraction:
        return 1 - self.loss_fraction

    @property
    def loss_percent(self) -> float:
        """Loss in percent, rounded to 0.1 as in the tables."""
        return round(float(self.loss_fraction * 100), 1)

    def value_at(self, level: float) -> int:
        want = as_fraction(level)
        for lvl, v in zip(self.levels, self.values):
            if as_fraction(lvl) == want:
                return v
        if want == 100:
            return self.max
        raise StatsError(f"level {level} not in report")

    def loss_display(self) -> str:
        if self.tx_count == self.rx_count:
            return "-"
        return f"{self.loss_percent:.1f}"


@dataclass(frozen=True)
class UrllcRequirement:
    max_latency: int = us(350)
    min_delivery: Fraction = Fraction(99999, 100000)
    percentile_level: float = 99.999

    def __post_init__(self):
        object.__setattr__(self, "min_delivery", as_fraction(self.min_delivery))
        if not 0 < self.min_delivery <= 1:
            raise StatsError("min_delivery must lie in (0, 1]")
        if self.max_latency <= 0:
            raise StatsError("max_latency must be positive")


@dataclass(frozen=True)
class Verdict:
    compliant: bool
    reasons: tuple[str, ...] = field(default=())

    def __str__(self) -> str:
        if self.compliant:
            return "compliant"
        return "violated: " + "; ".join(self.reasons)


def nearest_rank(p: float | Fraction, n: int) -> int:
    """1-based nearest rank for level ``p`` percent of ``n`` samples."""
    frac = as_fraction(p)
    if not 0 < frac <= 100:
        raise StatsError(f"percentile level {p} outside (0, 100]")
    return max(1, math.ceil(frac * n / 100))


def percentile(samples: Sequence[int] | np.ndarray, p: float) -> int:
    """Nearest-rank percentile of an ascending sequence."""
    n = len(samples)
    if n == 0:
        raise StatsError("no samples")
    return int(samples[nearest_rank(p, n) - 1])


def percentile_report(dist: LatencyDistribution,
                      levels: Sequence[float] = TABLE_LEVELS) -> PercentileReport:
    if dist.rx_count == 0:
        raise StatsError("no samples")
    ordered = dist.sorted_latencies()
    values = tuple(percentile(ordered, p) for p in levels)
    return PercentileReport(tuple(levels), values, int(ordered[-1]),
                            dist.tx_count, dist.rx_count)


def empirical_cdf(dist: LatencyDistribution | Sequence[int]) -> list[tuple[int, float]]:
    """Step points ``(latency, P[X <= latency])`` at every distinct value."""
    lat = dist.latencies if isinstance(dist, LatencyDistribution) else np.asarray(dist)
    if len(lat) == 0:
        raise StatsError("no samples")
    values, counts = np.unique(lat, return_counts=True)
    cum = np.cumsum(counts)
    n = int(cum[-1])
    return [(int(v), int(c) / n) for v, c in zip(values, cum)]


def worst_k(dist: LatencyDistribution, k: int, skip_warmup: int = 0) -> list[tuple[int, int]]:
    """The ``k`` largest latencies sent after the warm-up, in send-time order.

    Ties on latency prefer earlier packets.
    """
    if k < 1:
        raise StatsError("k must be >= 1")
    keep = np.nonzero(dist.send_times >= dist.epoch + skip_warmup)[0]
    if len(keep) == 0:
        return []
    lat = dist.latencies[keep]
    send = dist.send_times[keep]
    # lexsort: last key is primary
    order = np.lexsort((send, -lat))[:k]
    chosen = keep[np.sort(order)]
    return list(zip(dist.send_times[chosen].tolist(), dist.latencies[chosen].tolist()))


def urllc_check(report: PercentileReport, req: UrllcRequirement) -> Verdict:
    """Delivery ratio and tail latency against a requirement (both ``>=``/``<=``)."""
    tail = report.value_at(req.percentile_level)
    reasons = []
    if report.delivery < req.min_delivery:
        reasons.append(
            f"delivery {float(report.delivery) * 100:.5f}% below "
            f"{float(req.min_delivery) * 100:.5f}%")
    if tail > req.max_latency:
        reasons.append(
            f"p{req.percentile_level:g} latency {format_us(tail)} us exceeds "
            f"{format_us(req.max_latency)} us")
    return Verdict(not reasons, tuple(reasons))


def exact_decimal(ps: int, unit: int) -> str:
    """``ps / unit`` written without rounding or exponent."""
    q = (Decimal(ps) / Decimal(unit)).normalize()
    return f"{q:f}"


def report_row(scenario: str, mode: str, rate_kpps: float | str,
               report: PercentileReport) -> list[str]:
    report_levels = [report.value_at(p) for p in TABLE_LEVELS]
    rate = rate_kpps if isinstance(rate_kpps, str) else f"{rate_kpps:g}"
    return [scenario, mode, rate, report.loss_display(),
            *(format_us(v) for v in report_levels), format_us(report.max)]


def write_report_csv(path: str | Path, rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for row in rows:
            w.writerow(row)


def read_report_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_scatter_csv(path: str | Path, points: Iterable[tuple[int, int]], epoch: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "latency_us"])
        for t, lat in points:
            w.writerow([exact_decimal(t - epoch, S), exact_decimal(lat, US)])


def write_cdf_csv(path: str | Path, cdf: Iterable[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["latency_us", "fraction"])
        for lat, frac in cdf:
            w.writerow([exact_decimal(lat, US), repr(frac)])


def read_two_column_csv(path: str | Path) -> list[tuple[int, int]]:
    """Read a scatter CSV back into picosecond ``(time, latency)`` pairs."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        return [(seconds(a), us(b)) for a, b in r]
