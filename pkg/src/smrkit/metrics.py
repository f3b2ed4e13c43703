"""Resonance detection, coupling estimates and the Bode quality factor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from smrkit.exceptions import InputError
from smrkit.spectrum import Spectrum

PI2_8 = math.pi**2 / 8
# |S11| this close to 1 is treated as lossless and excluded from Bode Q
LOSSLESS_MARGIN = 1e-9


@dataclass(frozen=True)
class ResonancePair:
    """A series resonance (|Y| maximum) and the antiresonance above it.

    ``fp`` is None when |Y| keeps falling up to the end of the grid or the
    next resonance, so no interior minimum exists.
    """

    fs: float
    fp: float | None
    prominence: float  # dB

    @property
    def k2(self) -> float | None:
        return None if self.fp is None else coupling_from_fsfp(self.fs, self.fp)


def _interp_index(f: np.ndarray, x: float) -> float:
    return float(np.interp(x, np.arange(f.size), f))


def _parabolic(f: np.ndarray, y: np.ndarray, i: int) -> float:
    if i <= 0 or i >= y.size - 1:
        return float(f[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    den = a - 2 * b + c
    if den == 0:
        return float(f[i])
    return _interp_index(f, i + 0.5 * (a - c) / den)


def find_resonances(sp: Spectrum, min_prominence_db: float = 1.0) -> list[ResonancePair]:
    """Series resonances of |Y| and their antiresonances, in frequency order.

    Peaks are located on 20*log10|Y| with at least ``min_prominence_db`` of
    topographic prominence and refined with a parabola through the three
    highest samples. The antiresonance is the lowest |Y| between a peak and
    the next qualifying peak.
    """
    if len(sp) < 3:
        return []
    f = sp.frequencies
    db = 20 * np.log10(np.maximum(np.abs(sp.values), np.finfo(float).tiny))
    peaks, props = find_peaks(db, prominence=min_prominence_db)
    pairs = []
    for n, p in enumerate(peaks):
        stop = peaks[n + 1] if n + 1 < peaks.size else f.size
        seg = db[p + 1 : stop]
        fp = None
        if seg.size:
            m = p + 1 + int(np.argmin(seg))
            if m < f.size - 1:
                fp = _parabolic(f, db, m)
        pairs.append(ResonancePair(_parabolic(f, db, p), fp, float(props["prominences"][n])))
    return pairs


def coupling_from_fsfp(fs: float, fp: float) -> float:
    """k^2 = (pi^2/8) (fp^2 - fs^2) / fp^2."""
    if fp < fs:
        raise InputError(f"antiresonance {fp!r} lies below resonance {fs!r}")
    return PI2_8 * (fp * fp - fs * fs) / (fp * fp)


def fp_from_coupling(fs: float, k2: float) -> float:
    """Antiresonance implied by ``fs`` and ``k2`` (inverse of coupling_from_fsfp)."""
    return fs / math.sqrt(1 - k2 / PI2_8)


@dataclass(frozen=True, eq=False)
class BodeQ:
    frequencies: np.ndarray
    q: np.ndarray  # NaN where flagged
    flagged: np.ndarray
    f_peak: float
    q_peak: float

    @property
    def fq_product(self) -> float:
        return self.f_peak * self.q_peak


def reflection_from_admittance(y, z0: float = 50.0) -> np.ndarray:
    """One-port S11 of an admittance against ``z0``: (1 - z0 Y)/(1 + z0 Y)."""
    y = np.asarray(y, dtype=complex)
    return (1 - z0 * y) / (1 + z0 * y)


def bode_q(sp: Spectrum, z0: float = 50.0) -> BodeQ:
    """Bode quality factor Q(f) = omega * tau * |S11| / (1 - |S11|^2).

    S11 is the admittance re-referenced to ``z0`` as a one-port and tau the
    group delay -d(phase)/d(omega) of the unwrapped S11 phase (central
    differences inside the grid, one-sided at the ends). The magnitude of
    tau is used so that the sign convention of the phase does not matter.
    Points with |S11| >= 1 (lossless or active) are flagged and excluded
    from the peak.
    """
    if len(sp) < 3:
        raise InputError("Bode Q needs at least 3 points")
    w = sp.omega
    s11 = reflection_from_admittance(sp.values, z0)
    mag = np.abs(s11)
    phase = np.unwrap(np.angle(s11))
    tau = -np.gradient(phase, w)
    flagged = mag >= 1 - LOSSLESS_MARGIN
    with np.errstate(divide="ignore", invalid="ignore"):
        q = w * np.abs(tau) * mag / (1 - mag**2)
    flagged |= ~np.isfinite(q)
    q = np.where(flagged, np.nan, q)
    if np.all(flagged):
        return BodeQ(sp.frequencies, q, flagged, math.nan, math.nan)
    i = int(np.nanargmax(q))
    return BodeQ(sp.frequencies, q, flagged, float(sp.frequencies[i]), float(q[i]))
