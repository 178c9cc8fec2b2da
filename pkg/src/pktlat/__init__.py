"""Packet latency toolkit: trace analysis, a forwarding-core model and capacity estimates."""

from __future__ import annotations

from .capacity import CapacityResult, e2e_delay, estimate_tcpu, interrupt_budget, max_rate
from .pipeline import InterruptSpec, NodeProfile, SimResult, build_interrupt_schedule, simulate
from .profiles import builtin_profile
from .stats import LatencyDistribution, PercentileReport, UrllcRequirement, percentile, percentile_report
from .trace import CounterLayout, match_traces, read_pcap, write_pcap
from .traffic import ArrivalSequence, TrafficSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ArrivalSequence", "CapacityResult", "CounterLayout", "InterruptSpec", "LatencyDistribution",
    "NodeProfile", "PercentileReport", "SimResult", "TrafficSpec", "UrllcRequirement",
    "build_interrupt_schedule", "builtin_profile", "e2e_delay", "estimate_tcpu", "generate",
    "interrupt_budget", "match_traces", "max_rate", "percentile", "percentile_report",
    "read_pcap", "simulate", "write_pcap",
]
