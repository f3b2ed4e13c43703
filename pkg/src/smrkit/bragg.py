"""Quarter-wave acoustic Bragg reflector design and analysis."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from smrkit.core import Layer, Material, acoustic_impedance
from smrkit.exceptions import DegenerateMirrorError, InputError
from smrkit.spectrum import Spectrum
from smrkit.tmm import transform_impedance

DEFAULT_STOPBAND_THRESHOLD = 0.9


def quarter_wave_thickness(m: Material, f0: float) -> float:
    if not f0 > 0:
        raise InputError("f0 must be > 0")
    return m.velocity / (4 * f0)


def fractional_stopband(z1: float, z2: float) -> float:
    """Approximate fractional stopband width of a two-material mirror.

    ``z1`` is the low impedance, ``z2`` the high one. The closed form
    (4/pi)*asin((z2 - z1)/(z2 + z1)) exceeds 1 for contrast ratios above
    about 5.8; such values are clamped to 1 with a warning.
    """
    if not z1 > 0:
        raise InputError("impedances must be > 0")
    if z1 > z2:
        raise InputError(f"expected z1 <= z2 (low, high), got z1={z1!r} > z2={z2!r}")
    fbw = 4 / math.pi * math.asin((z2 - z1) / (z2 + z1))
    if fbw > 1:
        warnings.warn(f"stopband formula gives {fbw:.3f} > 1; reporting full band", stacklevel=2)
        return 1.0
    return fbw


@dataclass(frozen=True)
class MirrorSpec:
    low_material: Material
    high_material: Material
    t_low: float
    t_high: float
    pairs: float
    center_frequency: float
    termination: str = "low"  # material facing the cavity

    def __post_init__(self):
        if not (self.t_low > 0 and self.t_high > 0):
            raise InputError("mirror layer thicknesses must be > 0")
        if self.pairs < 0 or (2 * self.pairs) != int(2 * self.pairs):
            raise InputError(f"pairs must be a non-negative multiple of 0.5, got {self.pairs!r}")
        if not acoustic_impedance(self.high_material) > acoustic_impedance(self.low_material):
            raise DegenerateMirrorError("high-impedance material must have larger Z than the low one")
        if self.termination not in ("low", "high"):
            raise InputError("termination must be 'low' or 'high'")

    @property
    def fbw(self) -> float:
        return fractional_stopband(acoustic_impedance(self.low_material), acoustic_impedance(self.high_material))

    def layers(self) -> tuple[Layer, ...]:
        """Mirror layers top (cavity side) to bottom (substrate side).

        Materials alternate starting from ``termination``; 2*pairs layers in
        total, so 8.5 pairs gives L H L ... H L with 17 layers.
        """
        low = Layer(self.low_material, self.t_low)
        high = Layer(self.high_material, self.t_high)
        first, second = (low, high) if self.termination == "low" else (high, low)
        return tuple(first if i % 2 == 0 else second for i in range(int(round(2 * self.pairs))))


def design_mirror(low: Material, high: Material, f0: float, pairs: float, termination: str = "low") -> MirrorSpec:
    """Quarter-wave mirror centred on ``f0``."""
    zl, zh = acoustic_impedance(low), acoustic_impedance(high)
    if zl == zh:
        raise DegenerateMirrorError(f"{low.name} and {high.name} have no impedance contrast")
    if zl > zh:
        raise DegenerateMirrorError(f"low material {low.name} has the larger impedance; swap the arguments")
    return MirrorSpec(
        low_material=low,
        high_material=high,
        t_low=quarter_wave_thickness(low, f0),
        t_high=quarter_wave_thickness(high, f0),
        pairs=pairs,
        center_frequency=f0,
        termination=termination,
    )


def mirror_input_impedance(layers, substrate: Material, grid):
    grid = np.asarray(grid, dtype=float)
    z = np.full(grid.shape, substrate.complex_impedance, dtype=complex)
    for layer in reversed(layers):
        z = transform_impedance(layer, z, grid)
    return z


def mirror_reflectance(spec: MirrorSpec, substrate: Material, cavity_side_material: Material, grid) -> Spectrum:
    """Complex reflection coefficient seen from the cavity side.

    Impedances use each material's loss (``q_mech``); set it to infinity for
    a lossless analysis.
    """
    grid = np.asarray(grid, dtype=float)
    zin = mirror_input_impedance(spec.layers(), substrate, grid)
    zc = cavity_side_material.complex_impedance
    return Spectrum(grid, (zin - zc) / (zin + zc))


def stopband_edges(gamma: Spectrum, f0: float, threshold: float = DEFAULT_STOPBAND_THRESHOLD) -> tuple[float, float]:
    """Edges of the contiguous band around ``f0`` where |Gamma| >= threshold.

    Edges are linearly interpolated between grid points. Raises InputError
    if |Gamma(f0)| itself is below the threshold or the band reaches the
    end of the grid.
    """
    f = gamma.frequencies
    mag = np.abs(gamma.values)
    i0 = int(np.argmin(np.abs(f - f0)))
    if mag[i0] < threshold:
        raise InputError(f"|Gamma| = {mag[i0]:.3f} at f0 is below the threshold {threshold}")
    lo = i0
    while lo > 0 and mag[lo - 1] >= threshold:
        lo -= 1
    hi = i0
    while hi < f.size - 1 and mag[hi + 1] >= threshold:
        hi += 1
    if lo == 0 or hi == f.size - 1:
        raise InputError("stopband extends past the grid; widen the frequency range")

    def cross(a, b):
        t = (threshold - mag[a]) / (mag[b] - mag[a])
        return f[a] + t * (f[b] - f[a])

    return cross(lo - 1, lo), cross(hi, hi + 1)


def numeric_fbw(gamma: Spectrum, f0: float, threshold: float = DEFAULT_STOPBAND_THRESHOLD) -> float:
    lo, hi = stopband_edges(gamma, f0, threshold)
    return (hi - lo) / f0
