"""Time base and strict unit-suffixed quantity parsing.

All timestamps and durations inside the package are integer picosecond
ticks (one tick = 1 ps unless a stream says otherwise); physical model
formulas run in double precision.  Configuration files carry explicit
unit suffixes which are parsed strictly here.
"""

from __future__ import annotations

PS_PER_NS = 1_000
PS_PER_US = 1_000_000
PS_PER_MS = 1_000_000_000
PS_PER_S = 1_000_000_000_000

#: multipliers into picoseconds
_TIME_UNITS = {
    "ps": 1.0,
    "ns": float(PS_PER_NS),
    "us": float(PS_PER_US),
    "ms": float(PS_PER_MS),
    "s": float(PS_PER_S),
}

#: multipliers into microwatts
_POWER_UNITS = {
    "nW": 1e-3,
    "uW": 1.0,
    "mW": 1e3,
    "W": 1e6,
}

#: multipliers into counts per second
_RATE_UNITS = {
    "cps": 1.0,
    "kcps": 1e3,
    "Mcps": 1e6,
}


class UnitError(ValueError):
    """A quantity string is missing its unit or carries an unknown one."""


def _parse(text: str, units: dict[str, float], kind: str) -> float:
    parts = text.strip().split()
    if len(parts) != 2:
        raise UnitError(
            f"expected '<number> <unit>' for a {kind} quantity, got {text!r}"
        )
    value_str, unit = parts
    if unit not in units:
        allowed = ", ".join(units)
        raise UnitError(f"unknown {kind} unit {unit!r} (allowed: {allowed})")
    try:
        value = float(value_str)
    except ValueError as exc:
        raise UnitError(f"bad numeric value in {kind} quantity {text!r}") from exc
    return value * units[unit]


def parse_time_ps(text: str) -> float:
    """Parse a time like ``'50 ns'`` or ``'9.1 us'`` into picoseconds."""
    return _parse(text, _TIME_UNITS, "time")


def parse_power_uw(text: str) -> float:
    """Parse an optical power like ``'66 uW'`` into microwatts."""
    return _parse(text, _POWER_UNITS, "power")


def parse_rate_cps(text: str) -> float:
    """Parse a count rate like ``'35 kcps'`` into counts per second."""
    return _parse(text, _RATE_UNITS, "rate")


def ticks_to_seconds(ticks: float, resolution_ps: int = 1) -> float:
    return ticks * resolution_ps / PS_PER_S
