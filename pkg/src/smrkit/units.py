"""Parsing of quantities with unit suffixes.

Files accept plain SI numbers or numbers with a suffix (``28.2nm``,
``50GHz``, ``72.25um2``). Everything is converted to strict SI on read.
"""

from __future__ import annotations

import re
from decimal import Decimal

import numpy as np

# suffix -> power of ten
LENGTH_UNITS = {"m": 0, "mm": -3, "um": -6, "µm": -6, "nm": -9}
FREQUENCY_UNITS = {"hz": 0, "khz": 3, "mhz": 6, "ghz": 9, "thz": 12}
AREA_UNITS = {"m2": 0, "mm2": -6, "um2": -12, "µm2": -12, "µm²": -12}
RESISTANCE_UNITS = {"ohm": 0, "kohm": 3, "ω": 0}
INDUCTANCE_UNITS = {"h": 0, "mh": -3, "uh": -6, "nh": -9, "ph": -12}
CAPACITANCE_UNITS = {"f": 0, "uf": -6, "nf": -9, "pf": -12, "ff": -15}

_DIMENSIONS = {
    "length": LENGTH_UNITS,
    "frequency": FREQUENCY_UNITS,
    "area": AREA_UNITS,
    "resistance": RESISTANCE_UNITS,
    "inductance": INDUCTANCE_UNITS,
    "capacitance": CAPACITANCE_UNITS,
}

_QUANTITY_RE = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-zµ²Ω]*\d?)\s*$"
)


def parse_quantity(text: str, dimension: str) -> float:
    """Convert ``text`` to an SI float for the given dimension.

    A bare number is taken as SI already. Raises ValueError for a suffix that
    does not belong to ``dimension``.
    """
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse quantity {text!r}")
    suffix = m.group(2)
    if not suffix:
        return float(m.group(1))
    table = _DIMENSIONS[dimension]
    # length suffixes are case sensitive (m vs M is meaningless here, but mm/nm are not)
    key = suffix if dimension in ("length", "area") else suffix.lower()
    if key not in table:
        raise ValueError(f"unit {suffix!r} is not a {dimension} unit")
    # scale in decimal so that "28.2nm" becomes the double nearest 28.2e-9
    return float(Decimal(m.group(1)).scaleb(table[key]))


def parse_grid(text: str) -> np.ndarray:
    """Parse ``start:stop:points`` into a linear frequency grid in Hz."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:stop:points, got {text!r}")
    start = parse_quantity(parts[0], "frequency")
    stop = parse_quantity(parts[1], "frequency")
    try:
        points = int(parts[2])
    except ValueError:
        raise ValueError(f"grid point count must be an integer, got {parts[2]!r}") from None
    if not 0 < start < stop:
        raise ValueError("grid needs 0 < start < stop")
    if points < 2:
        raise ValueError("grid needs at least 2 points")
    return np.linspace(start, stop, points)


def format_grid(frequencies: np.ndarray) -> str:
    return f"{float(frequencies[0])!r}:{float(frequencies[-1])!r}:{len(frequencies)}"
