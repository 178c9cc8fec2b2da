"""Integer picosecond time base.

Every timestamp (TimePoint) and interval (Duration) in the package is a plain
``int`` counting picoseconds. 12.5 ns hardware ticks and 0.1 us report
precision are both exact in this unit.
"""

from __future__ import annotations

import re
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
S = 1_000_000_000_000

#: resolution of the timestamping NICs
HW_TICK = 12_500

_UNITS = {"ps": PS, "ns": NS, "us": US, "µs": US, "μs": US, "ms": MS, "s": S}
_DURATION_RE = re.compile(r"^\s*([-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\s*([a-zµμ]*)\s*$")


def us(value: float | str | int | Decimal) -> int:
    """Microseconds to picoseconds, exact for decimal literals."""
    return _scale(value, US)


def ms(value: float | str | int | Decimal) -> int:
    return _scale(value, MS)


def seconds(value: float | str | int | Decimal) -> int:
    return _scale(value, S)


def _scale(value, unit: int) -> int:
    if isinstance(value, int):
        return value * unit
    d = Decimal(str(value)) * unit
    return int(d.to_integral_value(rounding=ROUND_HALF_EVEN))


def parse_duration(text: str | int | float, default_unit: str = "s") -> int:
    """Parse ``"1.55us"``, ``"30 s"`` or a bare number into picoseconds."""
    if isinstance(text, bool):
        raise ValueError(f"not a duration: {text!r}")
    if isinstance(text, (int, float)):
        return _scale(text, _UNITS[default_unit])
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"not a duration: {text!r}")
    number, unit = m.groups()
    unit = unit or default_unit
    if unit not in _UNITS:
        raise ValueError(f"unknown time unit {unit!r} in {text!r}")
    return _scale(Decimal(number), _UNITS[unit])


def format_duration(ps: int) -> str:
    """Shortest exact textual form, inverse of :func:`parse_duration`."""
    for name in ("s", "ms", "us", "ns"):
        unit = _UNITS[name]
        if ps % unit == 0:
            return f"{ps // unit}{name}"
    for name in ("s", "ms", "us", "ns"):
        q = Decimal(ps) / _UNITS[name]
        if abs(q) >= 1:
            return f"{q.normalize():f}{name}"
    return f"{ps}ps"


def round_div(num: int, den: int) -> int:
    """Integer division rounding half away from zero."""
    if den < 0:
        num, den = -num, -den
    if num >= 0:
        return (2 * num + den) // (2 * den)
    return -((-2 * num + den) // (2 * den))


def format_us(ps: int | Fraction) -> str:
    """Picoseconds as microseconds with one decimal (table precision)."""
    if isinstance(ps, Fraction):
        tenths = round_div(ps.numerator, ps.denominator * 100_000)
    else:
        tenths = round_div(int(ps), 100_000)
    sign = "-" if tenths < 0 else ""
    tenths = abs(tenths)
    return f"{sign}{tenths // 10}.{tenths % 10}"


def to_us(ps: int) -> float:
    return ps / US


def to_seconds(ps: int) -> float:
    return ps / S


def quantize(ps: int, tick: int = HW_TICK) -> int:
    """Snap a timestamp to the nearest multiple of ``tick``."""
    return round_div(ps, tick) * tick


def as_fraction(value: int | float | str | Fraction | Decimal) -> Fraction:
    """Exact rational for a rate given as text, int, Decimal or Fraction.

    Floats go through their shortest repr so ``166.7`` means 1667/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value)) if isinstance(value, (str, Decimal)) else Fraction(value)
