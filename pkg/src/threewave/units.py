"""Parsing of quantity strings such as ``"2237.2 MHz"`` into internal units.

Internal units: MHz, us, V/m, W/cm^2, K, Debye, rad.
"""

import re

__all__ = ["UnitError", "parse_quantity", "format_quantity", "DIMENSIONS"]


class UnitError(ValueError):
    pass


# unit -> factor to the internal unit of its dimension
DIMENSIONS = {
    "frequency": {"Hz": 1e-6, "kHz": 1e-3, "MHz": 1.0, "GHz": 1e3},
    "time": {"s": 1e6, "ms": 1e3, "us": 1.0, "µs": 1.0, "μs": 1.0, "ns": 1e-3, "ps": 1e-6},
    "field": {"V/m": 1.0, "kV/m": 1e3, "V/cm": 1e2},
    "intensity": {"W/cm^2": 1.0, "W/cm2": 1.0, "mW/cm^2": 1e-3, "W/m^2": 1e-4, "kW/cm^2": 1e3},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6},
    "dipole": {"D": 1.0, "debye": 1.0},
    "angle": {"rad": 1.0, "deg": 3.141592653589793 / 180.0},
}

_RX = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


def parse_quantity(value, dimension: str) -> float:
    """``"10 mK"`` with dimension ``"temperature"`` -> ``0.01``.

    Bare numbers are rejected: every dimensioned field carries a unit.
    """
    units = DIMENSIONS[dimension]
    if not isinstance(value, str):
        raise UnitError(f"expected a {dimension} with unit (one of {', '.join(units)}), got {value!r}")
    m = _RX.match(value)
    if not m:
        raise UnitError(f"cannot parse quantity {value!r}")
    num, unit = m.groups()
    if unit not in units:
        raise UnitError(f"unit {unit!r} is not a {dimension} unit (expected one of {', '.join(units)})")
    return float(num) * units[unit]


def format_quantity(value: float, unit: str) -> str:
    """Exact round trip: ``repr`` of the float followed by the internal unit."""
    return f"{float(value)!r} {unit}"
