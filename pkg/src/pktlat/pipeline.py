"""Discrete-event model of a single forwarding core.

A packet crosses the NIC path (``transfer_delay``), waits in a tail-drop FIFO,
is accepted greedily into a batch of at most ``batch_size`` packets, and the
whole batch leaves together once every packet in it has been processed.
Periodic OS interrupts freeze the core; service that overlaps an interrupt
window resumes when the window ends.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .stats import LatencyDistribution
from .timebase import S, as_fraction, round_div
from .traffic import ArrivalSequence, TrafficSpec, generate_cbr

_INF = float("inf")


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class InterruptSpec:
    """One strictly periodic interrupt train.

    Occurrence ``k`` starts at ``phase + round(k / rate)`` and keeps the core
    busy for ``busy_window`` ps.
    """

    name: str
    rate: Fraction
    busy_window: int
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rate", as_fraction(self.rate))
        if self.rate <= 0:
            raise SimError(f"{self.name}: interrupt rate must be positive")
        if self.busy_window < 0:
            raise SimError(f"{self.name}: busy_window must not be negative")
        if self.busy_window >= self.period:
            raise SimError(f"{self.name}: busy_window must be shorter than the period")
        if self.phase < 0:
            raise SimError(f"{self.name}: phase must not be negative")

    @property
    def period(self) -> Fraction:
        return S / self.rate

    def starts(self) -> Iterator[int]:
        p, q = self.period.numerator, self.period.denominator
        k = 0
        while True:
            yield self.phase + (2 * k * p + q) // (2 * q)
            k += 1


class Window(NamedTuple):
    start: int
    duration: int
    name: str

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class InterruptSchedule:
    """Merged, non-overlapping busy windows; ``occurrences`` counts raw ones."""

    windows: tuple[Window, ...]
    occurrences: int
    by_name: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.windows)

    def busy_time(self) -> int:
        return sum(w.duration for w in self.windows)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        starts = np.fromiter((w.start for w in self.windows), dtype=np.int64, count=len(self.windows))
        ends = np.fromiter((w.end for w in self.windows), dtype=np.int64, count=len(self.windows))
        return starts, ends


def _raw_windows(specs: Sequence[InterruptSpec]) -> Iterator[Window]:
    def train(spec: InterruptSpec):
        for s in spec.starts():
            yield Window(s, spec.busy_window, spec.name)

    return heapq.merge(*(train(s) for s in specs))


def _merge(raw: Iterator[Window]) -> Iterator[Window]:
    cur = None
    for w in raw:
        if cur is None:
            cur = w
        elif w.start <= cur.end:
            end = max(cur.end, w.end)
            names = cur.name if w.name in cur.name.split("+") else f"{cur.name}+{w.name}"
            cur = Window(cur.start, end - cur.start, names)
        else:
            yield cur
            cur = w
    if cur is not None:
        yield cur


def iter_windows(specs: Sequence[InterruptSpec]) -> Iterator[Window]:
    """Unbounded merged window stream in start order."""
    return _merge(_raw_windows(specs))


def build_interrupt_schedule(specs: Sequence[InterruptSpec], duration: int) -> InterruptSchedule:
    """All occurrences starting before ``duration``, merged where they overlap."""
    raw = []
    if duration > 0:
        for w in _raw_windows(specs):
            if w.start >= duration:
                break
            raw.append(w)
    by_name: dict[str, int] = {}
    for w in raw:
        by_name[w.name] = by_name.get(w.name, 0) + 1
    return InterruptSchedule(tuple(_merge(iter(raw))), len(raw), by_name)


@dataclass(frozen=True)
class NodeProfile:
    transfer_delay: int
    cpu_time: int
    batch_size: int = 32
    queue_capacity: int = 4096
    interrupts: tuple[InterruptSpec, ...] = ()
    label: str = "custom"
    name: str = "custom"
    cpu_jitter: int = 0  # uniform extra service per packet, ps; 0 keeps runs exact
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "interrupts", tuple(self.interrupts))
        if self.transfer_delay < 0:
            raise SimError("transfer_delay must not be negative")
        if self.cpu_time < 0:
            raise SimError("cpu_time must not be negative")
        if not 1 <= self.batch_size <= 32:
            raise SimError("batch_size must lie in 1..32")
        if self.queue_capacity < self.batch_size:
            raise SimError("queue_capacity must be at least batch_size")
        if self.cpu_jitter < 0:
            raise SimError("cpu_jitter must not be negative")

    @property
    def base_latency(self) -> int:
        """Latency of a lone packet that meets no interrupt."""
        return 2 * self.transfer_delay + self.cpu_time

    def with_(self, **changes) -> NodeProfile:
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SimResult:
    distribution: LatencyDistribution
    drops: list[int]
    drop_times: list[int]
    interrupt_count: int
    horizon: int

    def drops_after(self, t: int) -> int:
        return sum(1 for d in self.drop_times if d >= t)

    def after(self, skip: int) -> LatencyDistribution:
        """Samples and transmit count restricted to packets sent at or after ``skip``."""
        d = self.distribution
        keep = d.send_times >= d.epoch + skip
        n = int(keep.sum())
        return LatencyDistribution(d.send_times[keep], d.latencies[keep], d.counters[keep],
                                   n + self.drops_after(d.epoch + skip), d.epoch)

    def to_bytes(self) -> bytes:
        """Canonical serialization, used for run-to-run identity checks."""
        d = self.distribution
        parts = [d.send_times.tobytes(), d.latencies.tobytes(), d.counters.tobytes(),
                 np.asarray(self.drops, dtype=np.int64).tobytes(),
                 np.array([d.tx_count, self.interrupt_count, self.horizon], dtype=np.int64).tobytes()]
        return b"|".join(parts)


def simulate(profile: NodeProfile, arrivals: ArrivalSequence) -> SimResult:
    times = arrivals.times
    n = len(times)
    tr = profile.transfer_delay
    cpu = profile.cpu_time
    batch = profile.batch_size
    cap = profile.queue_capacity
    jitter = profile.cpu_jitter
    rng = random.Random(profile.seed) if jitter else None

    stream = iter_windows(profile.interrupts)
    ws: list = []
    we: list = []

    def pull() -> None:
        w = next(stream, None)
        if w is None:
            ws.append(_INF)
            we.append(_INF)
        else:
            ws.append(w.start)
            we.append(w.end)

    j = 0

    def service_end(t: int, work: int) -> int:
        nonlocal j
        while True:
            if j >= len(ws):
                pull()
            s = ws[j]
            e = we[j]
            if e <= t:
                j += 1
            elif s <= t:
                t = e  # core frozen until the window closes
                j += 1
            elif t + work <= s:
                return t + work
            else:
                work -= s - t
                t = e
                j += 1

    latency = [0] * n
    accepted: list[int] = []
    drops: list[int] = []
    head = 0
    i = 0
    free = -1
    while True:
        while i < n and times[i] + tr <= free:
            if len(accepted) - head < cap:
                accepted.append(i)
            else:
                drops.append(i)
            i += 1
        if head == len(accepted):
            if i >= n:
                break
            free = times[i] + tr
            continue
        take = min(batch, len(accepted) - head)
        work = take * cpu
        if rng is not None:
            work += sum(rng.randint(0, jitter) for _ in range(take))
        end = service_end(free, work)
        out = end + tr
        for k in range(head, head + take):
            idx = accepted[k]
            latency[idx] = out - times[idx]
        head += take
        free = end

    horizon = max(free, times[-1] + tr if n else 0, 0)
    idx = np.asarray(accepted, dtype=np.int64)
    send = np.asarray(times, dtype=np.int64)[idx] if n else np.zeros(0, dtype=np.int64)
    lat = np.asarray(latency, dtype=np.int64)[idx] if n else np.zeros(0, dtype=np.int64)
    dist = LatencyDistribution(send, lat, idx, n)
    count = build_interrupt_schedule(profile.interrupts, horizon).occurrences
    return SimResult(dist, drops, [times[d] for d in drops], count, horizon)


def simulate_interrupt_sampling(traffic_rate: Fraction | float, schedule: InterruptSchedule,
                                base_latency: int, duration: int) -> list[tuple[int, int]]:
    """Probe an interrupt schedule with a CBR packet train.

    A probe sent at ``t`` inside window ``[s, e)`` sees ``base_latency + (e - t)``;
    every other probe sees ``base_latency``.
    """
    probes = generate_cbr(TrafficSpec(rate=traffic_rate, duration=duration)).times
    t = np.asarray(probes, dtype=np.int64)
    starts, ends = schedule.arrays()
    lat = np.full(len(t), base_latency, dtype=np.int64)
    if len(starts) and len(t):
        k = np.searchsorted(starts, t, side="right") - 1
        inside = k >= 0
        inside[inside] = t[inside] < ends[k[inside]]
        lat[inside] += ends[k[inside]] - t[inside]
    return list(zip(probes, lat.tolist()))


def calibrate_queue_capacity(overload_latency: int, cpu_time: int) -> int:
    """Queue depth whose saturated FIFO delay matches an observed overload latency."""
    if cpu_time <= 0:
        raise SimError("cpu_time must be positive to calibrate a queue")
    return round_div(overload_latency, cpu_time)


def sustainable_rate(profile: NodeProfile, horizon: int = S) -> Fraction:
    """Packets per second the core can serve once interrupts take their share."""
    if profile.cpu_time <= 0:
        raise SimError("cpu_time must be positive")
    busy = build_interrupt_schedule(profile.interrupts, horizon).busy_time()
    return Fraction(horizon - busy, profile.cpu_time) * S / horizon
