"""Scenario configuration files (YAML).

Top-level sections mirror the runtime types::

    scenario:              # ScenarioConfig
      profile: hw-snort-fwd
      rate_sweep_kpps: [10, 60, 120]
      duration: 30s
      warmup_skip: 1s
      worst_k: 5000
      output_dir: out
    traffic:               # TrafficSpec minus the rate
      burst_size: 1
      frame_size: 64
      link_speed_bps: 10000000000
    profile:               # optional NodeProfile, inline or on top of a built-in
      base: hw-snort-fwd
      cpu_time: 11.4us
      interrupts:
        - {name: loc_host, rate: 83.325, busy_window: 7.8us, phase: 0s}
    requirement:           # UrllcRequirement
      max_latency: 350us
      min_delivery: 0.99999
      percentile_level: 99.999
    burst_study:
      bursts: [1, 2, 4, 8, 16, 32, 64]
      batches: [4, 32]
    capacity:
      l2fwd_medians: {HW: 3.1us, VM: 3.3us}
      interrupt_tables:
        HW: [[166.7, 10.9us], [83.3, 13.6us]]
      scenarios:
        - {scenario: Snort-fwd, mode: HW, median: 14.5us}

Durations take a unit suffix (ps, ns, us, ms, s); bare numbers are seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .capacity import (APP_MEDIANS, HW_INTERRUPT_TABLE, L2FWD_MEDIANS, VM_INTERRUPT_TABLE,
                       CapacityInputs, CapacityRow, capacity)
from .pipeline import InterruptSpec, NodeProfile
from .profiles import builtin_profile
from .stats import UrllcRequirement
from .timebase import S, as_fraction, format_duration, parse_duration

DEFAULT_BURSTS = (1, 2, 4, 8, 16, 32, 64)
DEFAULT_BATCHES = (4, 32)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CapacitySection:
    l2fwd_medians: dict[str, int]
    interrupt_tables: dict[str, tuple[tuple[Fraction, int], ...]]
    scenarios: tuple[tuple[str, str, int], ...]

    @classmethod
    def published(cls) -> CapacitySection:
        return cls(dict(L2FWD_MEDIANS), {"HW": HW_INTERRUPT_TABLE, "VM": VM_INTERRUPT_TABLE},
                   tuple((s, m, v) for (s, m), v in APP_MEDIANS.items()))

    def rows(self) -> list[CapacityRow]:
        out = []
        for scenario, mode, median in self.scenarios:
            if mode not in self.l2fwd_medians:
                raise ConfigError(f"no l2fwd median for mode {mode!r}")
            table = self.interrupt_tables.get(mode, ())
            inputs = CapacityInputs(median, self.l2fwd_medians[mode], tuple(table))
            out.append(CapacityRow(scenario, mode, inputs, capacity(inputs)))
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    profile: NodeProfile
    rate_sweep: tuple[Fraction, ...]
    duration: int = 30 * S
    warmup_skip: int = S
    worst_k: int = 5000
    output_dir: str = "out"
    burst_size: int = 1
    frame_size: int = 64
    link_speed: int = 10_000_000_000
    requirement: UrllcRequirement = field(default_factory=UrllcRequirement)
    bursts: tuple[int, ...] = DEFAULT_BURSTS
    batches: tuple[int, ...] = DEFAULT_BATCHES
    capacity: CapacitySection = field(default_factory=CapacitySection.published)
    profile_ref: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.rate_sweep:
            raise ConfigError("rate sweep is empty")
        if any(r <= 0 for r in self.rate_sweep):
            raise ConfigError("sweep rates must be positive")
        if self.duration <= self.warmup_skip:
            raise ConfigError("duration must exceed warmup_skip")
        if self.worst_k < 1:
            raise ConfigError("worst_k must be >= 1")
        if not all(1 <= b <= 64 for b in self.bursts):
            raise ConfigError("bursts must lie in 1..64")
        if not all(1 <= b <= 32 for b in self.batches):
            raise ConfigError("batches must lie in 1..32")


def _number(value: Fraction) -> int | str:
    """YAML-friendly exact form of a rational."""
    if value.denominator == 1:
        return int(value)
    d = value.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d == 1:
        return format((Decimal(value.numerator) / Decimal(value.denominator)).normalize(), "f")
    return f"{value.numerator}/{value.denominator}"


def _dur(value: Any, key: str) -> int:
    try:
        return parse_duration(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _kpps(value: Any) -> Fraction:
    try:
        return as_fraction(value) * 1000
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad rate {value!r}") from None


def _profile(section: Any, ref: str | None) -> NodeProfile:
    if section is None:
        if ref is None:
            raise ConfigError("scenario.profile or a profile section is required")
        return builtin_profile(ref)
    if not isinstance(section, dict):
        raise ConfigError("profile section must be a mapping")
    base_name = section.get("base", ref)
    base = builtin_profile(base_name, batch_size=int(section.get("batch_size", 32))) if base_name else None
    kw: dict[str, Any] = {}
    for key in ("transfer_delay", "cpu_time", "cpu_jitter"):
        if key in section:
            kw[key] = _dur(section[key], f"profile.{key}")
    for key in ("batch_size", "queue_capacity", "seed"):
        if key in section:
            kw[key] = int(section[key])
    for key in ("label", "name"):
        if key in section:
            kw[key] = str(section[key])
    if "interrupts" in section:
        irq = []
        for i, item in enumerate(section["interrupts"] or []):
            try:
                irq.append(InterruptSpec(str(item["name"]), as_fraction(item["rate"]),
                                         _dur(item["busy_window"], f"interrupts[{i}].busy_window"),
                                         _dur(item.get("phase", 0), f"interrupts[{i}].phase")))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"profile.interrupts[{i}]: missing {exc}") from None
        kw["interrupts"] = tuple(irq)
    if base is not None:
        return base.with_(**kw)
    for key in ("transfer_delay", "cpu_time"):
        if key not in kw:
            raise ConfigError(f"profile.{key} is required without a base profile")
    return NodeProfile(**kw)


def _capacity(section: Any) -> CapacitySection:
    if section is None:
        return CapacitySection.published()
    defaults = CapacitySection.published()
    medians = defaults.l2fwd_medians
    if "l2fwd_medians" in section:
        medians = {m: _dur(v, f"capacity.l2fwd_medians.{m}")
                   for m, v in (section["l2fwd_medians"] or {}).items()}
    tables = defaults.interrupt_tables
    if "interrupt_tables" in section:
        tables = {}
        for mode, rows in (section["interrupt_tables"] or {}).items():
            tables[mode] = tuple((as_fraction(r), _dur(d, f"capacity.interrupt_tables.{mode}"))
                                 for r, d in rows)
    scen = defaults.scenarios
    if "scenarios" in section:
        scen = tuple((str(s["scenario"]), str(s["mode"]), _dur(s["median"], "capacity.scenarios.median"))
                     for s in section["scenarios"])
    return CapacitySection(medians, tables, scen)


def parse_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    sc = data.get("scenario") or {}
    tr = data.get("traffic") or {}
    req = data.get("requirement") or {}
    bs = data.get("burst_study") or {}
    ref = sc.get("profile")
    if ref is not None and not isinstance(ref, str):
        raise ConfigError("scenario.profile must name a built-in profile")
    try:
        profile = _profile(data.get("profile"), ref)
        requirement = UrllcRequirement(
            _dur(req.get("max_latency", "350us"), "requirement.max_latency"),
            as_fraction(req.get("min_delivery", "0.99999")),
            float(req.get("percentile_level", 99.999)))
        return ScenarioConfig(
            profile=profile,
            rate_sweep=tuple(_kpps(r) for r in sc.get("rate_sweep_kpps", [10])),
            duration=_dur(sc.get("duration", "30s"), "scenario.duration"),
            warmup_skip=_dur(sc.get("warmup_skip", "1s"), "scenario.warmup_skip"),
            worst_k=int(sc.get("worst_k", 5000)),
            output_dir=str(sc.get("output_dir", "out")),
            burst_size=int(tr.get("burst_size", 1)),
            frame_size=int(tr.get("frame_size", 64)),
            link_speed=int(tr.get("link_speed_bps", 10_000_000_000)),
            requirement=requirement,
            bursts=tuple(int(b) for b in bs.get("bursts", DEFAULT_BURSTS)),
            batches=tuple(int(b) for b in bs.get("batches", DEFAULT_BATCHES)),
            capacity=_capacity(data.get("capacity")),
            profile_ref=ref,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data or {})


def load_capacity(path: str | Path) -> CapacitySection:
    """Only the ``capacity`` section; the rest of the file is ignored."""
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    try:
        return _capacity(data.get("capacity"))
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"capacity: {exc}") from None


def to_dict(cfg: ScenarioConfig) -> dict:
    p = cfg.profile
    return {
        "scenario": {
            **({"profile": cfg.profile_ref} if cfg.profile_ref else {}),
            "rate_sweep_kpps": [_number(r / 1000) for r in cfg.rate_sweep],
            "duration": format_duration(cfg.duration),
            "warmup_skip": format_duration(cfg.warmup_skip),
            "worst_k": cfg.worst_k,
            "output_dir": cfg.output_dir,
        },
        "traffic": {"burst_size": cfg.burst_size, "frame_size": cfg.frame_size,
                    "link_speed_bps": cfg.link_speed},
        "profile": {
            "name": p.name, "label": p.label,
            "transfer_delay": format_duration(p.transfer_delay),
            "cpu_time": format_duration(p.cpu_time),
            "batch_size": p.batch_size, "queue_capacity": p.queue_capacity,
            "cpu_jitter": format_duration(p.cpu_jitter), "seed": p.seed,
            "interrupts": [{"name": i.name, "rate": _number(i.rate),
                            "busy_window": format_duration(i.busy_window),
                            "phase": format_duration(i.phase)} for i in p.interrupts],
        },
        "requirement": {
            "max_latency": format_duration(cfg.requirement.max_latency),
            "min_delivery": _number(cfg.requirement.min_delivery),
            "percentile_level": cfg.requirement.percentile_level,
        },
        "burst_study": {"bursts": list(cfg.bursts), "batches": list(cfg.batches)},
        "capacity": {
            "l2fwd_medians": {m: format_duration(v) for m, v in cfg.capacity.l2fwd_medians.items()},
            "interrupt_tables": {m: [[_number(r), format_duration(d)] for r, d in rows]
                                 for m, rows in cfg.capacity.interrupt_tables.items()},
            "scenarios": [{"scenario": s, "mode": m, "median": format_duration(v)}
                          for s, m, v in cfg.capacity.scenarios],
        },
    }


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize so that ``parse_config(yaml.safe_load(text)) == cfg``."""
    # a full inline profile must not also pull in a base
    data = to_dict(cfg)
    data["scenario"].pop("profile", None)
    return yaml.safe_dump(data, sort_keys=False)

