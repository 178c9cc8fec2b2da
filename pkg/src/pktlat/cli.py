"""Command line runner: ``pktlat {simulate,capacity,analyze,burst-study,alias-sim}``.

Exit codes: 0 success, 1 URLLC violation (with ``--fail-on-violation``),
2 usage or configuration error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import gzip
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import capacity as cap
from .config import CapacitySection, ConfigError, ScenarioConfig, load_capacity, load_config
from .pipeline import SimError, build_interrupt_schedule, simulate, simulate_interrupt_sampling
from .profiles import builtin_profile, scenario_of
from .stats import (LatencyDistribution, LatencySample, StatsError, UrllcRequirement, empirical_cdf,
                    percentile_report, report_row, urllc_check, worst_k, write_cdf_csv,
                    write_report_csv, write_scatter_csv)
from .timebase import S, as_fraction, format_us, parse_duration, us
from .trace import CounterLayout, TraceError, match_traces, read_capture, warmup_filter
from .traffic import TrafficError, TrafficSpec, generate

log = logging.getLogger("pktlat")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _rate_list(text: str) -> tuple[Fraction, ...]:
    try:
        rates = tuple(as_fraction(x) * 1000 for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}") from None
    if not rates:
        raise argparse.ArgumentTypeError("rate list is empty")
    return rates


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _kpps_label(rate: Fraction) -> str:
    k = rate / 1000
    return str(k.numerator) if k.denominator == 1 else f"{float(k):g}"


def _resolve(args) -> ScenarioConfig:
    """Config file first, then command-line overrides."""
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ScenarioConfig(profile=builtin_profile(args.profile or "hw-l2fwd"),
                             rate_sweep=(Fraction(10_000),), profile_ref=args.profile or "hw-l2fwd")
    changes = {}
    if args.config and args.profile:
        changes["profile"] = builtin_profile(args.profile)
        changes["profile_ref"] = args.profile
    if getattr(args, "rate", None) is not None:
        changes["rate_sweep"] = args.rate
    if getattr(args, "duration", None) is not None:
        changes["duration"] = parse_duration(args.duration)
    if args.skip_warmup is not None:
        changes["warmup_skip"] = parse_duration(args.skip_warmup)
    if args.worst_k is not None:
        changes["worst_k"] = args.worst_k
    if args.out is not None:
        changes["output_dir"] = args.out
    if getattr(args, "burst", None) is not None:
        if len(args.burst) == 0:
            raise UsageError("burst list is empty")
        changes["bursts"] = args.burst
        changes["burst_size"] = args.burst[0]
    if getattr(args, "batch", None) is not None:
        if len(args.batch) == 0:
            raise UsageError("batch list is empty")
        changes["batches"] = args.batch
        profile = changes.get("profile", cfg.profile)
        changes["profile"] = profile.with_(batch_size=args.batch[0],
                                           queue_capacity=max(profile.queue_capacity, args.batch[0]))
    req = cfg.requirement
    if getattr(args, "max_latency_us", None) is not None:
        req = replace(req, max_latency=us(args.max_latency_us))
    if getattr(args, "min_delivery", None) is not None:
        req = UrllcRequirement(req.max_latency, as_fraction(args.min_delivery), req.percentile_level)
    if getattr(args, "level", None) is not None:
        req = replace(req, percentile_level=args.level)
    changes["requirement"] = req
    return replace(cfg, **changes)


def _sim_point(cfg: ScenarioConfig, rate: Fraction):
    spec = TrafficSpec(rate=rate, duration=cfg.duration, burst_size=cfg.burst_size,
                       frame_size=cfg.frame_size, link_speed=cfg.link_speed)
    arrivals = generate(spec)
    result = simulate(cfg.profile, arrivals)
    return arrivals.times, result


def _write_samples(path: Path, times: list[int], dist: LatencyDistribution) -> None:
    """``counter,time_ps,latency_ps``; dropped packets have an empty latency."""
    lat = dict(zip(dist.counters.tolist(), dist.latencies.tolist()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["counter", "time_ps", "latency_ps"])
    for c, t in enumerate(times):
        w.writerow([c, t, lat.get(c, "")])
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", compresslevel=6, mtime=0, filename="") as gz:
        gz.write(buf.getvalue().encode())


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    profile = cfg.profile
    name = profile.name
    scenario = scenario_of(name)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            points = list(pool.map(_sim_point, [cfg] * len(cfg.rate_sweep), cfg.rate_sweep))
    else:
        points = [_sim_point(cfg, r) for r in cfg.rate_sweep]

    rows, verdicts = [], []
    violated = False
    for rate, (times, result) in zip(cfg.rate_sweep, points):
        label = _kpps_label(rate)
        stem = f"{name}_{label}kpps"
        steady = result.after(cfg.warmup_skip)
        if steady.rx_count == 0:
            raise UsageError(f"{stem}: no packets delivered after warm-up")
        report = percentile_report(steady)
        rows.append(report_row(scenario, profile.label, label, report))
        verdict = urllc_check(report, cfg.requirement)
        violated |= not verdict.compliant
        verdicts.append([scenario, profile.label, label, str(verdict)])
        write_scatter_csv(out / f"{stem}_scatter.csv",
                          worst_k(result.distribution, cfg.worst_k, cfg.warmup_skip))
        if not args.no_raw:
            _write_samples(out / f"{stem}_samples.csv.gz", times, result.distribution)
        print(f"{scenario} {profile.label} {label} kpps: loss {report.loss_display()} "
              f"median {format_us(report.values[0])} us max {format_us(report.max)} us -> {verdict}")
    write_report_csv(out / "table.csv", rows)
    with open(out / "verdicts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "mode", "rate_kpps", "verdict"])
        w.writerows(verdicts)
    return EXIT_VIOLATION if violated and args.fail_on_violation else EXIT_OK


def cmd_capacity(args) -> int:
    section = load_capacity(args.config) if args.config else CapacitySection.published()
    rows = section.rows()
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    cap.write_capacity_csv(out / "capacity.csv", rows)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(cap.CAPACITY_HEADER)
    for row in rows:
        w.writerow(row.cells())
    return EXIT_OK


def cmd_analyze(args) -> int:
    layout = CounterLayout(args.offset, args.width, args.byte_order)
    quantum = 12_500 if args.hw_quantize else None
    tx = read_capture(args.tx, layout, args.port, quantum)
    rx = read_capture(args.rx, layout, args.port, quantum)
    trace = match_traces(tx, rx)
    skip = parse_duration(args.skip_warmup) if args.skip_warmup is not None else S
    trace = warmup_filter(trace, skip)
    dist = trace.distribution
    if dist.rx_count == 0:
        raise TraceError("no matched packets after warm-up")
    req = UrllcRequirement(us(args.max_latency_us), as_fraction(args.min_delivery), args.level)
    report = percentile_report(dist)
    verdict = urllc_check(report, req)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv", [report_row(args.scenario, args.mode, args.rate_kpps, report)])
    write_scatter_csv(out / "scatter.csv", worst_k(dist, args.worst_k or 5000), epoch=dist.epoch)
    write_cdf_csv(out / "cdf.csv", empirical_cdf(dist))
    (out / "verdict.txt").write_text(f"{verdict}\n")
    print(f"matched {dist.rx_count}/{dist.tx_count} loss {report.loss_display()}% "
          f"p50 {format_us(report.values[0])} us p99.999 {format_us(report.value_at(99.999))} us "
          f"max {format_us(report.max)} us -> {verdict}")
    return EXIT_VIOLATION if not verdict.compliant and args.fail_on_violation else EXIT_OK


def burst_study(cfg: ScenarioConfig, rate: Fraction, out: Path | None = None) -> list[dict]:
    """Run every (burst, batch) pair; infeasible bursts are reported, not raised."""
    summary = []
    for burst in cfg.bursts:
        for batch in cfg.batches:
            entry = {"burst": burst, "batch": batch}
            try:
                spec = TrafficSpec(rate=rate, duration=cfg.duration, burst_size=burst,
                                   frame_size=cfg.frame_size, link_speed=cfg.link_speed)
                profile = cfg.profile.with_(batch_size=batch,
                                            queue_capacity=max(cfg.profile.queue_capacity, batch))
                result = simulate(profile, generate(spec))
            except (TrafficError, SimError) as exc:
                entry.update(status=f"error: {exc}")
                summary.append(entry)
                continue
            steady = result.after(cfg.warmup_skip)
            cdf = empirical_cdf(steady)
            report = percentile_report(steady)
            entry.update(status="ok", median=report.values[0], max=report.max, cdf=cdf,
                         loss=report.loss_display())
            if out is not None:
                write_cdf_csv(out / f"cdf_burst{burst}_batch{batch}.csv", cdf)
            summary.append(entry)
    return summary


def cmd_burst_study(args) -> int:
    if not args.config and not args.profile:
        args.profile = "vm-snort-filter"
    cfg = _resolve(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rate = cfg.rate_sweep[0]
    summary = burst_study(cfg, rate, out)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["burst", "batch", "median_us", "max_us", "loss_pct", "status"])
        for e in summary:
            if e["status"] == "ok":
                w.writerow([e["burst"], e["batch"], format_us(e["median"]), format_us(e["max"]),
                            e["loss"], "ok"])
            else:
                w.writerow([e["burst"], e["batch"], "", "", "", e["status"]])
            print(f"burst {e['burst']:>2} batch {e['batch']:>2}: " + (
                f"median {format_us(e['median'])} us max {format_us(e['max'])} us"
                if e["status"] == "ok" else e["status"]))
    return EXIT_OK


def cmd_alias_sim(args) -> int:
    cfg = _resolve(args)
    profile = cfg.profile
    schedule = build_interrupt_schedule(profile.interrupts, cfg.duration)
    base = us(args.base_latency_us) if args.base_latency_us is not None else profile.base_latency
    rate = cfg.rate_sweep[0]
    points = simulate_interrupt_sampling(rate, schedule, base, cfg.duration)
    dist = LatencyDistribution.from_samples(
        (LatencySample(t, lat, c) for c, (t, lat) in enumerate(points)), tx_count=len(points))
    skip = parse_duration(args.skip_warmup) if args.skip_warmup is not None else 0
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"alias_{profile.name}_{_kpps_label(rate)}kpps"
    write_scatter_csv(out / f"{stem}_scatter.csv", worst_k(dist, cfg.worst_k, skip))
    elevated = sum(1 for _, lat in points if lat > base)
    distinct = len({lat for _, lat in points if lat > base})
    print(f"{len(points)} probes, {len(schedule)} windows, {elevated} elevated "
          f"({distinct} distinct latencies)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pktlat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rate=True):
        p.add_argument("--config", help="scenario YAML file")
        p.add_argument("--profile", help="built-in profile name")
        if rate:
            p.add_argument("--rate", type=_rate_list, help="comma-separated kpps values")
        p.add_argument("--duration", help="run length, e.g. 30s")
        p.add_argument("--skip-warmup", help="warm-up to exclude, e.g. 1s")
        p.add_argument("--worst-k", type=int)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", help="sweep rates through the pipeline model")
    common(p)
    p.add_argument("--burst", type=_int_list, help="burst size (first value used)")
    p.add_argument("--batch", type=_int_list, help="batch size (first value used)")
    p.add_argument("--max-latency-us", type=float)
    p.add_argument("--min-delivery")
    p.add_argument("--level", type=float)
    p.add_argument("--fail-on-violation", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-raw", action="store_true", help="skip per-packet sample files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("capacity", help="CPU time and maximum rate from medians")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("analyze", help="match TX/RX captures and report")
    p.add_argument("tx")
    p.add_argument("rx")
    p.add_argument("--offset", type=int, default=0, help="counter offset in UDP payload")
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--byte-order", choices=("big", "little"), default="big")
    p.add_argument("--port", type=int, default=53, help="UDP destination port")
    p.add_argument("--hw-quantize", action="store_true", help="snap timestamps to 12.5 ns")
    p.add_argument("--skip-warmup")
    p.add_argument("--worst-k", type=int)
    p.add_argument("--max-latency-us", type=float, default=350.0)
    p.add_argument("--min-delivery", default="0.99999")
    p.add_argument("--level", type=float, default=99.999)
    p.add_argument("--scenario", default="trace")
    p.add_argument("--mode", default="-")
    p.add_argument("--rate-kpps", default="-")
    p.add_argument("--fail-on-violation", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("burst-study", help="CDFs for burst x batch combinations")
    common(p)
    p.add_argument("--burst", type=_int_list)
    p.add_argument("--batch", type=_int_list)
    p.set_defaults(func=cmd_burst_study)

    p = sub.add_parser("alias-sim", help="probe-train sampling of the interrupt schedule")
    common(p)
    p.add_argument("--base-latency-us", type=float)
    p.set_defaults(func=cmd_alias_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, SimError, TrafficError, StatsError, cap.CapacityError) as exc:
        print(f"pktlat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceError, OSError) as exc:
        print(f"pktlat: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
