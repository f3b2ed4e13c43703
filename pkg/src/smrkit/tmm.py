"""One-dimensional acoustic transmission-line solver and Mason admittance.

Each layer is a lossy acoustic transmission line with characteristic
impedance rho*v_c and propagation constant j*omega/v_c, where
v_c = v*(1 + j/(2Q)). Loads are folded from the outer terminations inward
to the two faces of the piezoelectric layer, whose electrical input
impedance then follows from the Mason model.
"""

from __future__ import annotations

from typing import Literal

import numpy as np

from smrkit.core import Layer, Stack, require_valid
from smrkit.exceptions import InputError, SingularTransformError
from smrkit.spectrum import Spectrum

# relative nudge applied to a grid point that lands on an analytic pole
POLE_SHIFT = 1e-9


def transform_impedance(layer: Layer, load, f):
    """Input impedance of ``layer`` terminated by ``load`` at frequency ``f``.

    Works elementwise on arrays of frequencies (and loads). Raises
    SingularTransformError if the result is not finite.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise InputError("frequency must be > 0")
    mat = layer.material
    vc = mat.complex_velocity
    z = mat.density * vc
    th = np.tanh(1j * 2 * np.pi * f * layer.thickness / vc)
    load = np.asarray(load, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        zin = z * (load + z * th) / (z + load * th)
    if not np.all(np.isfinite(zin)):
        raise SingularTransformError(
            f"non-finite input impedance through {mat.name} ({layer.thickness:.4g} m)"
        )
    return zin[()] if zin.ndim == 0 else zin


def _fold(layers, termination, f):
    z = termination
    for layer in layers:
        z = transform_impedance(layer, z, f)
    return z


def stack_load_impedance(s: Stack, side: Literal["above", "below"], f):
    """Acoustic impedance seen from the piezo layer looking up or down.

    ``side="above"`` folds from the top termination (free surface: 0) down
    to the piezo top face; ``side="below"`` folds from the substrate up to
    the piezo bottom face.
    """
    f = np.asarray(f, dtype=float)
    if side in ("above", "above-piezo"):
        term = 0.0 if s.top_load is None else s.top_load.complex_impedance
        layers = s.layers[: s.piezo_index]
    elif side in ("below", "below-piezo"):
        term = s.substrate.complex_impedance
        layers = s.layers[s.piezo_index + 1 :][::-1]
    else:
        raise InputError(f"side must be 'above' or 'below', got {side!r}")
    z = np.broadcast_to(np.asarray(term, dtype=complex), f.shape)
    z = _fold(layers, z, f)
    return z[()] if np.ndim(z) == 0 else z


def static_capacitance(s: Stack) -> float:
    piezo = s.piezo
    return piezo.material.eps33 * s.area / piezo.thickness


def _mason(s: Stack, f: np.ndarray) -> np.ndarray:
    piezo = s.piezo
    mat = piezo.material
    vc = mat.complex_velocity
    zp = mat.density * vc
    w = 2 * np.pi * f
    c0 = static_capacitance(s)
    kt2 = mat.e33**2 / (mat.eps33 * mat.density * vc**2)
    phi = w * piezo.thickness / vc
    zt = stack_load_impedance(s, "above", f) / zp
    zb = stack_load_impedance(s, "below", f) / zp
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        num = (zt + zb) * np.sin(phi) + 2j * (1 - np.cos(phi))
        den = (zt + zb) * np.cos(phi) + 1j * (1 + zt * zb) * np.sin(phi)
        # written as Y = jwC0 / bracket so that kt2 = 0 returns jwC0 exactly
        return 1j * w * c0 / (1 - kt2 / phi * num / den)


def mason_admittance_array(s: Stack, f) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Mason admittance; returns (Y, flagged).

    Points where the closed form is singular are re-evaluated once at
    ``f*(1+POLE_SHIFT)`` and flagged.
    """
    require_valid(s)
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if np.any(f <= 0):
        raise InputError("frequency must be > 0")
    y = _mason(s, f)
    bad = ~np.isfinite(y)
    if np.any(bad):
        y[bad] = _mason(s, f[bad] * (1 + POLE_SHIFT))
        still = ~np.isfinite(y)
        if np.any(still):
            idx = int(np.flatnonzero(still)[0])
            raise SingularTransformError(f"singular admittance at index {idx} ({f[idx]:.6g} Hz)")
    return y, bad


def mason_admittance(s: Stack, f: float) -> complex:
    """Electrical admittance (S) of the stack at one frequency."""
    y, _ = mason_admittance_array(s, f)
    return complex(y[0])


def admittance_spectrum(s: Stack, grid) -> Spectrum:
    """Mason admittance over a frequency grid.

    Evaluation is vectorised over the grid. Each point is independent, so
    the result equals point-by-point evaluation.
    """
    grid = np.asarray(grid, dtype=float)
    y, flagged = mason_admittance_array(s, grid)
    return Spectrum(grid, y, flagged)


def apply_parasitics(sp: Spectrum, rs: float = 0.0, ls: float = 0.0, c_feed: float = 0.0) -> Spectrum:
    """Add shunt feedthrough capacitance, then series routing R and L."""
    if rs < 0 or ls < 0 or c_feed < 0:
        raise InputError("parasitics must be non-negative")
    w = sp.omega
    y = sp.values + 1j * w * c_feed if c_feed else sp.values
    if rs or ls:
        y = 1 / (rs + 1j * w * ls + 1 / y)
    return sp.with_values(y)
