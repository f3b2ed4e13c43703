from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex quantity (usually admittance in S) on a frequency grid in Hz.

    ``flagged`` marks points whose value is suspect, e.g. an analytic pole
    that had to be evaluated at a nudged frequency.
    """

    frequencies: np.ndarray
    values: np.ndarray
    flagged: np.ndarray | None = None

    def __post_init__(self):
        f = _frozen(self.frequencies, float)
        v = _frozen(self.values, complex)
        if f.shape != v.shape:
            raise ValueError(f"{f.size} frequencies but {v.size} values")
        if f.size and not np.all(f > 0):
            raise ValueError("frequencies must be positive")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly increasing")
        flags = np.zeros(f.shape, bool) if self.flagged is None else _frozen(self.flagged, bool)
        if flags.shape != f.shape:
            raise ValueError("flag mask does not match the grid")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "flagged", flags)

    def __len__(self) -> int:
        return self.frequencies.size

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        return 20 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.values))

    def with_values(self, values) -> Spectrum:
        return Spectrum(self.frequencies, values, self.flagged)

    def window(self, fmin: float, fmax: float) -> Spectrum:
        m = (self.frequencies >= fmin) & (self.frequencies <= fmax)
        return Spectrum(self.frequencies[m], self.values[m], self.flagged[m])
