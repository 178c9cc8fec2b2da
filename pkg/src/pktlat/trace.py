"""Capture ingest and TX/RX matching.

Reads classic libpcap files (micro- and nanosecond magics, either byte
order) or ``counter,time_ps`` CSV, pulls the packet counter out of the UDP
payload, and pairs transmit and receive observations by counter.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .stats import LatencyDistribution
from .timebase import NS, US, quantize

log = logging.getLogger(__name__)

MAGIC_US = 0xA1B2C3D4
MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
DEFAULT_PORT = 53


class TraceError(ValueError):
    pass


class CaptureRecord(NamedTuple):
    timestamp: int
    counter: int


@dataclass(frozen=True)
class CounterLayout:
    payload_offset: int = 0
    width: int = 8
    byte_order: str = "big"

    def __post_init__(self):
        if self.payload_offset < 0 or not 1 <= self.width <= 8:
            raise TraceError("counter must be 1..8 bytes at a non-negative offset")
        if self.byte_order not in ("big", "little"):
            raise TraceError("byte_order must be 'big' or 'little'")

    def extract(self, payload: bytes) -> int | None:
        end = self.payload_offset + self.width
        if end > len(payload):
            return None
        return int.from_bytes(payload[self.payload_offset:end], self.byte_order)

    def encode(self, counter: int, payload_len: int) -> bytes:
        buf = bytearray(max(payload_len, self.payload_offset + self.width))
        buf[self.payload_offset:self.payload_offset + self.width] = counter.to_bytes(self.width, self.byte_order)
        return bytes(buf)


@dataclass
class PcapReader:
    """One sequential pass over a pcap file; skip counters survive the read."""

    path: str | Path
    layout: CounterLayout = field(default_factory=CounterLayout)
    dst_port: int = DEFAULT_PORT
    quantum: int | None = None
    skipped_filter: int = 0
    skipped_short: int = 0
    nanosecond: bool = False

    def read(self) -> list[CaptureRecord]:
        data = Path(self.path).read_bytes()
        if len(data) < 24:
            raise TraceError(f"{self.path}: malformed global header ({len(data)} bytes)")
        magic = struct.unpack_from("<I", data)[0]
        if magic in (MAGIC_US, MAGIC_NS):
            endian = "<"
        elif struct.unpack_from(">I", data)[0] in (MAGIC_US, MAGIC_NS):
            endian = ">"
            magic = struct.unpack_from(">I", data)[0]
        else:
            raise TraceError(f"{self.path}: malformed global header (magic {magic:#010x})")
        self.nanosecond = magic == MAGIC_NS
        frac_unit = NS if self.nanosecond else US
        linktype = struct.unpack_from(endian + "I", data, 20)[0] & 0x0FFFFFFF
        if linktype not in (LINKTYPE_ETHERNET, LINKTYPE_RAW):
            raise TraceError(f"{self.path}: unsupported link type {linktype}")

        rec_hdr = struct.Struct(endian + "IIII")
        records: list[CaptureRecord] = []
        off = 24
        size = len(data)
        while off < size:
            if off + 16 > size:
                raise TraceError(f"{self.path}: truncated record header at offset {off}")
            sec, frac, incl, _orig = rec_hdr.unpack_from(data, off)
            if off + 16 + incl > size:
                raise TraceError(f"{self.path}: truncated record at offset {off}")
            frame = data[off + 16:off + 16 + incl]
            off += 16 + incl
            payload = self._udp_payload(frame, linktype)
            if payload is None:
                self.skipped_filter += 1
                continue
            counter = self.layout.extract(payload)
            if counter is None:
                self.skipped_short += 1
                continue
            ts = sec * 10**12 + frac * frac_unit
            if self.quantum:
                ts = quantize(ts, self.quantum)
            records.append(CaptureRecord(ts, counter))
        if self.skipped_filter or self.skipped_short:
            log.warning("%s: skipped %d non-matching and %d short packets",
                        self.path, self.skipped_filter, self.skipped_short)
        return records

    def _udp_payload(self, frame: bytes, linktype: int) -> bytes | None:
        if linktype == LINKTYPE_ETHERNET:
            if len(frame) < 14 or frame[12:14] != b"\x08\x00":
                return None
            ip = frame[14:]
        else:
            ip = frame
        if len(ip) < 20 or ip[0] >> 4 != 4 or ip[9] != 17:
            return None
        if struct.unpack_from("!H", ip, 6)[0] & 0x1FFF:
            return None  # non-first fragment
        ihl = (ip[0] & 0x0F) * 4
        if len(ip) < ihl + 8:
            return None
        dport, ulen = struct.unpack_from("!HH", ip, ihl + 2)
        if dport != self.dst_port:
            return None
        end = ihl + ulen if ulen >= 8 else len(ip)
        return ip[ihl + 8:min(end, len(ip))]


def read_pcap(path: str | Path, layout: CounterLayout | None = None,
              dst_port: int = DEFAULT_PORT, quantum: int | None = None) -> list[CaptureRecord]:
    return PcapReader(path, layout or CounterLayout(), dst_port, quantum).read()


def _udp_frame(counter: int, layout: CounterLayout, dst_port: int, frame_size: int) -> bytes:
    payload_len = max(frame_size - 4 - 14 - 20 - 8, layout.payload_offset + layout.width)
    payload = layout.encode(counter, payload_len)
    udp = struct.pack("!HHHH", 4000, dst_port, 8 + len(payload), 0) + payload
    total = 20 + len(udp)
    ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64, 17, 0,
                     bytes([10, 0, 0, 1]), bytes([10, 0, 0, 2]))
    csum = _ip_checksum(ip)
    ip = ip[:10] + struct.pack("!H", csum) + ip[12:]
    eth = b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x08\x00"
    return eth + ip + udp


def _ip_checksum(header: bytes) -> int:
    s = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def write_pcap(path: str | Path, records: Iterable[CaptureRecord | tuple[int, int]],
               nanosecond: bool = True, byte_order: str = "<",
               layout: CounterLayout | None = None, dst_port: int = DEFAULT_PORT,
               frame_size: int = 64) -> None:
    """Write UDP frames carrying each record's counter at its timestamp.

    Timestamps are truncated to the file's resolution.
    """
    layout = layout or CounterLayout()
    unit = NS if nanosecond else US
    magic = MAGIC_NS if nanosecond else MAGIC_US
    hdr = struct.Struct(byte_order + "IIII")
    with open(path, "wb") as fh:
        fh.write(struct.pack(byte_order + "IHHiIII", magic, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET))
        for ts, counter in records:
            frame = _udp_frame(counter, layout, dst_port, frame_size)
            sec, rem = divmod(ts, 10**12)
            fh.write(hdr.pack(sec, rem // unit, len(frame), len(frame) + 4))
            fh.write(frame)


def read_csv(path: str | Path) -> list[CaptureRecord]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["counter", "time_ps"]:
            raise TraceError(f"{path}:1: expected header counter,time_ps, got {header}")
        out = []
        for lineno, row in enumerate(r, start=2):
            try:
                if len(row) != 2:
                    raise ValueError
                out.append(CaptureRecord(int(row[1]), int(row[0])))
            except ValueError:
                raise TraceError(f"{path}:{lineno}: unparsable row {row!r}") from None
    return out


def write_csv(path: str | Path, records: Iterable[CaptureRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["counter", "time_ps"])
        for ts, counter in records:
            w.writerow([counter, ts])


def read_capture(path: str | Path, layout: CounterLayout | None = None,
                 dst_port: int = DEFAULT_PORT, quantum: int | None = None) -> list[CaptureRecord]:
    """Dispatch on extension: ``.csv`` or pcap otherwise."""
    if str(path).endswith(".csv"):
        return read_csv(path)
    return read_pcap(path, layout, dst_port, quantum)


@dataclass(frozen=True, eq=False)
class MatchedTrace:
    distribution: LatencyDistribution
    lost: dict[int, int]  # counter -> tx timestamp
    duplicate_counters: frozenset[int]
    spurious_counters: frozenset[int]

    @property
    def lost_counters(self) -> frozenset[int]:
        return frozenset(self.lost)

    @property
    def epoch(self) -> int:
        return self.distribution.epoch


def _first_occurrence(records: Sequence[CaptureRecord]) -> tuple[dict[int, int], set[int]]:
    seen: dict[int, int] = {}
    dup: set[int] = set()
    for ts, c in records:
        if c in seen:
            dup.add(c)
            # "first" means earliest observation, independent of record order
            if ts < seen[c]:
                seen[c] = ts
        else:
            seen[c] = ts
    return seen, dup


def match_traces(tx: Sequence[CaptureRecord], rx: Sequence[CaptureRecord]) -> MatchedTrace:
    tx_map, tx_dup = _first_occurrence(tx)
    rx_map, rx_dup = _first_occurrence(rx)
    matched = sorted((t, c) for c, t in tx_map.items() if c in rx_map)
    send = np.fromiter((t for t, _ in matched), dtype=np.int64, count=len(matched))
    cnt = np.fromiter((c for _, c in matched), dtype=np.int64, count=len(matched))
    recv = np.fromiter((rx_map[c] for _, c in matched), dtype=np.int64, count=len(matched))
    lat = recv - send
    if len(lat) and lat.min() < 0:
        bad = int(cnt[int(np.argmin(lat))])
        raise TraceError(f"clock misalignment: counter {bad} received before it was sent")
    epoch = min(tx_map.values()) if tx_map else 0
    dist = LatencyDistribution(send, lat, cnt, len(tx_map), epoch)
    lost = {c: t for c, t in tx_map.items() if c not in rx_map}
    spurious = frozenset(c for c in rx_map if c not in tx_map)
    if spurious:
        log.warning("%d counters seen on RX only", len(spurious))
    return MatchedTrace(dist, lost, frozenset(tx_dup | rx_dup), spurious)


def warmup_filter(trace: MatchedTrace, skip: int) -> MatchedTrace:
    """Forget everything sent before ``epoch + skip``, matched or lost."""
    if skip < 0:
        raise TraceError("skip must not be negative")
    d = trace.distribution
    cutoff = d.epoch + skip
    keep = d.send_times >= cutoff
    lost = {c: t for c, t in trace.lost.items() if t >= cutoff}
    n = int(keep.sum())
    dist = LatencyDistribution(d.send_times[keep], d.latencies[keep], d.counters[keep], n + len(lost), d.epoch)
    return MatchedTrace(dist, lost, trace.duplicate_counters, trace.spurious_counters)
