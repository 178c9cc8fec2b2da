"""Built-in node profiles calibrated against the published measurements.

Interrupt windows default to the measured worst-case packet delay ``d`` minus
the forwarding baseline, so a packet that meets a full window is delayed to
exactly ``d``. ``mode="raw"`` instead uses the TSC-measured handler times
plus a fixed IO/context-switch overhead (host only).

The DuT timer is modelled 100 ppm slow against the load generator. With an
exact 250 Hz tick and an exact 10 kpps probe train every interrupt would land
on the same probe offset and no aliasing stripes would appear.
"""

from __future__ import annotations

from fractions import Fraction

from .pipeline import InterruptSpec, NodeProfile, SimError, calibrate_queue_capacity
from .timebase import S, round_div, us

HOST_TICK_RATE = Fraction(249975, 1000)

# (loc, iwi) worst-case delay with IO and context switches; raw handler times
HW_LOC_DELAY, HW_IWI_DELAY = us("10.9"), us("13.6")
VM_LOC_HOST_DELAY, VM_IWI_HOST_DELAY, VM_LOC_GUEST_DELAY = us("17.5"), us("19.2"), us("17.5")
HW_LOC_HANDLER, HW_IWI_HANDLER = us("5.5"), us("8.2")
SWITCH_OVERHEAD = us("2.3")

HW_BASELINE = us("3.1")
VM_BASELINE = us("3.3")


def tick_period(tick_rate: Fraction = HOST_TICK_RATE) -> int:
    return round_div(S * tick_rate.denominator, tick_rate.numerator)


def host_timer_specs(loc_window: int, iwi_window: int, tick_rate: Fraction = HOST_TICK_RATE,
                     phase: int = 0, suffix: str = "host") -> list[InterruptSpec]:
    """Repeating ``loc, loc, iwi`` triple on a uniform timer tick."""
    tick = tick_period(tick_rate)
    r = tick_rate / 3
    return [
        InterruptSpec(f"loc_{suffix}", r, loc_window, phase),
        InterruptSpec(f"loc_{suffix}", r, loc_window, phase + tick),
        InterruptSpec(f"iwi_{suffix}", r, iwi_window, phase + 2 * tick),
    ]


def guest_timer_specs(loc_window: int, tick_rate: Fraction = HOST_TICK_RATE,
                      phase: int | None = None) -> list[InterruptSpec]:
    """The guest kernel's own ``loc`` train, offset half a tick from the host's."""
    if phase is None:
        phase = tick_period(tick_rate) // 2
    return [InterruptSpec("loc_vm", tick_rate, loc_window, phase)]


def hw_interrupts(baseline: int = HW_BASELINE, mode: str = "calibrated",
                  overhead: int = SWITCH_OVERHEAD, phase: int = 0) -> list[InterruptSpec]:
    if mode == "calibrated":
        return host_timer_specs(HW_LOC_DELAY - baseline, HW_IWI_DELAY - baseline, phase=phase)
    if mode == "raw":
        return host_timer_specs(HW_LOC_HANDLER + overhead, HW_IWI_HANDLER + overhead, phase=phase)
    raise SimError(f"unknown interrupt mode {mode!r}")


def vm_interrupts(baseline: int = VM_BASELINE, mode: str = "calibrated",
                  phase: int = 0) -> list[InterruptSpec]:
    if mode != "calibrated":
        raise SimError("only calibrated interrupt windows exist for the VM setup")
    return (host_timer_specs(VM_LOC_HOST_DELAY - baseline, VM_IWI_HOST_DELAY - baseline, phase=phase)
            + guest_timer_specs(VM_LOC_GUEST_DELAY - baseline, phase=phase + tick_period() // 2))


# (label, transfer, cpu, overload latency used to size the queue or None, queue default)
_TABLE = {
    # l2fwd: the whole baseline is polled IO on the forwarding core, so an
    # interrupt anywhere inside it stalls the packet (footprint = d).
    "hw-l2fwd": ("HW", 0, HW_BASELINE, None, 4096),
    "vm-l2fwd": ("VM", 0, VM_BASELINE, None, 4096),
    "hw-snort-fwd": ("HW", us("1.55"), us("11.4"), us("30609.5"), None),
    "vm-snort-fwd": ("VM", us("1.65"), us("12.6"), us("2469.6"), None),
    "hw-snort-filter": ("HW", us("1.55"), us("14.3"), us("27992.9"), None),
    "vm-snort-filter": ("VM", us("1.65"), us("15.1"), us("3036.9"), None),
}

BUILTIN_PROFILES = tuple(_TABLE)


def builtin_profile(name: str, batch_size: int = 32, interrupt_mode: str = "calibrated",
                    phase: int = 0) -> NodeProfile:
    try:
        label, transfer, cpu, overload, queue = _TABLE[name]
    except KeyError:
        raise SimError(f"unknown profile {name!r}; choose from {', '.join(_TABLE)}") from None
    if queue is None:
        queue = calibrate_queue_capacity(overload, cpu)
    if label == "HW":
        irq = hw_interrupts(HW_BASELINE, interrupt_mode, phase=phase)
    else:
        irq = vm_interrupts(VM_BASELINE, interrupt_mode, phase=phase)
    return NodeProfile(transfer_delay=transfer, cpu_time=cpu, batch_size=batch_size,
                       queue_capacity=max(queue, batch_size), interrupts=tuple(irq),
                       label=label, name=name)


def scenario_of(name: str) -> str:
    """Table row label, e.g. ``hw-snort-fwd`` -> ``Snort-fwd``."""
    app = name.split("-", 1)[1] if "-" in name else name
    return {"l2fwd": "DPDK-l2fwd", "snort-fwd": "Snort-fwd", "snort-filter": "Snort-filter"}.get(app, app)
