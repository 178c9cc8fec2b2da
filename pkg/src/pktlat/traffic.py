"""Deterministic packet arrival sequences: CBR streams and back-to-back bursts."""

from __future__ import annotations

import csv
import operator
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .timebase import S, as_fraction

ETHERNET_OVERHEAD = 20  # preamble, SFD and inter-frame gap, bytes


class TrafficError(ValueError):
    pass


@dataclass(frozen=True)
class TrafficSpec:
    rate: Fraction  # average packets per second
    duration: int  # ps
    burst_size: int = 1
    frame_size: int = 64
    link_speed: int = 10_000_000_000  # bit/s

    def __post_init__(self):
        object.__setattr__(self, "rate", as_fraction(self.rate))
        if self.rate <= 0:
            raise TrafficError(f"rate must be positive, got {self.rate}")
        if self.burst_size < 1:
            raise TrafficError("burst_size must be >= 1")
        if self.duration < 0:
            raise TrafficError("duration must not be negative")
        if self.frame_size < 64:
            raise TrafficError("frame_size below Ethernet minimum of 64 bytes")
        if self.link_speed <= 0:
            raise TrafficError("link_speed must be positive")

    @property
    def count(self) -> int:
        return int(self.rate * self.duration // S)

    @property
    def wire_time(self) -> int:
        """Serialization time of one frame on the wire, ps (rounded)."""
        bits = (self.frame_size + ETHERNET_OVERHEAD) * 8
        return round(Fraction(bits * S, self.link_speed))

    @property
    def burst_period(self) -> Fraction:
        return self.burst_size * S / self.rate


@dataclass(frozen=True, eq=False)
class ArrivalSequence:
    """Send timestamps (ps, strictly increasing); counter ``i`` is ``times[i]``."""

    times: list[int]

    def __post_init__(self):
        t = self.times
        if not all(map(operator.lt, t, t[1:])):
            raise TrafficError("arrival timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other) -> bool:
        return isinstance(other, ArrivalSequence) and self.times == other.times

    @property
    def counters(self) -> range:
        return range(len(self.times))

    def __iter__(self):
        return iter(enumerate(self.times))


def _grid(n: int, period: Fraction) -> list[int]:
    """``round(k * period)`` for k < n, in exact integer arithmetic."""
    p, q = period.numerator, period.denominator
    return [(2 * k * p + q) // (2 * q) for k in range(n)]


def generate_cbr(spec: TrafficSpec) -> ArrivalSequence:
    """Packets at exact spacing ``1/rate`` from t=0; ``floor(rate*duration)`` of them."""
    if spec.burst_size != 1:
        raise TrafficError("generate_cbr requires burst_size 1")
    return ArrivalSequence(_grid(spec.count, S / spec.rate))


def generate_bursty(spec: TrafficSpec) -> ArrivalSequence:
    """Bursts of ``burst_size`` back-to-back frames, one burst per ``burst_size/rate``.

    The total count is truncated to ``floor(rate*duration)`` so the average rate
    holds within one packet; the last burst may be partial.
    """
    if spec.burst_size == 1:
        return generate_cbr(spec)
    gap = spec.wire_time
    period = spec.burst_period
    if gap * spec.burst_size >= period:
        raise TrafficError(
            f"burst exceeds period: {spec.burst_size} frames need "
            f"{gap * spec.burst_size} ps but bursts repeat every {float(period):.0f} ps")
    n = spec.count
    b = spec.burst_size
    starts = _grid(-(-n // b), period)
    return ArrivalSequence([starts[k // b] + (k % b) * gap for k in range(n)])


def generate(spec: TrafficSpec) -> ArrivalSequence:
    return generate_cbr(spec) if spec.burst_size == 1 else generate_bursty(spec)


def write_arrivals_csv(path: str | Path, seq: ArrivalSequence) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["counter", "time_ps"])
        w.writerows(enumerate(seq.times))


def read_arrivals_csv(path: str | Path) -> ArrivalSequence:
    """Arrival sequence from a ``counter,time_ps`` file; counters must run 0,1,2..."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["counter", "time_ps"]:
            raise TrafficError(f"{path}: expected header counter,time_ps, got {header}")
        times = []
        for lineno, row in enumerate(r, start=2):
            try:
                c, t = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise TrafficError(f"{path}:{lineno}: unparsable row {row!r}") from exc
            if c != len(times):
                raise TrafficError(f"{path}:{lineno}: counter {c} out of sequence")
            times.append(t)
    return ArrivalSequence(times)
