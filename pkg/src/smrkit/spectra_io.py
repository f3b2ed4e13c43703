"""Touchstone v1 two-port files, S/Y conversion and spectrum CSV export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from smrkit.exceptions import ConversionSingularityError, InputError, TouchstoneError
from smrkit.spectrum import Spectrum
from smrkit.units import FREQUENCY_UNITS

CSV_COLUMNS = ("freq_hz", "re_y", "im_y", "mag_y", "phase_deg")


@dataclass(frozen=True, eq=False)
class TwoPortSpectrum:
    frequencies: np.ndarray
    s: np.ndarray  # shape (N, 2, 2)
    z0: float = 50.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float).reshape(-1)
        s = np.asarray(self.s, dtype=complex)
        if s.shape != (f.size, 2, 2):
            raise InputError(f"S array must have shape ({f.size}, 2, 2), got {s.shape}")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise InputError("frequencies must be strictly increasing")
        if not self.z0 > 0:
            raise InputError("reference impedance must be > 0")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)


def _parse_option_line(line: str, lineno: int) -> tuple[float, str, float]:
    tokens = line[1:].split()
    unit, param, fmt, z0 = "ghz", "s", "ma", 50.0
    i = 0
    while i < len(tokens):
        t = tokens[i].lower()
        if t in FREQUENCY_UNITS:
            unit = t
        elif t in ("s", "y", "z", "h", "g"):
            param = t
        elif t in ("ma", "ri", "db"):
            fmt = t
        elif t == "r":
            if i + 1 >= len(tokens):
                raise TouchstoneError("option line: R needs a value", lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(f"option line: bad reference impedance {tokens[i + 1]!r}", lineno) from None
            i += 1
        else:
            raise TouchstoneError(f"option line: unknown token {tokens[i]!r}", lineno)
        i += 1
    if param != "s":
        raise TouchstoneError(f"only S parameters are supported, got {param.upper()}", lineno)
    if not z0 > 0:
        raise TouchstoneError("reference impedance must be > 0", lineno)
    return 10.0 ** FREQUENCY_UNITS[unit], fmt, z0


def _pairs_to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "ri":
        return a + 1j * b
    if fmt == "ma":
        return a * np.exp(1j * np.radians(b))
    return 10 ** (a / 20) * np.exp(1j * np.radians(b))


def parse_touchstone(text: str) -> TwoPortSpectrum:
    """Read a Touchstone v1 .s2p document.

    Data rows hold nine numbers: frequency then S11 S21 S12 S22 as pairs in
    the format of the option line. ``!`` starts a comment.
    """
    option = None
    rows = []
    row_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneError("Touchstone v2 keywords are not supported; supply a v1 file", lineno)
        if line.startswith("#"):
            if option is not None:
                raise TouchstoneError("second option line", lineno)
            option = _parse_option_line(line, lineno)
            continue
        fields = line.split()
        if len(fields) != 9:
            raise TouchstoneError(f"expected 9 columns for a two-port row, got {len(fields)}", lineno)
        try:
            rows.append([float(x) for x in fields])
        except ValueError:
            raise TouchstoneError("non-numeric value in data row", lineno) from None
        row_lines.append(lineno)
    scale, fmt, z0 = option if option is not None else (1e9, "ma", 50.0)
    data = np.array(rows, dtype=float).reshape(-1, 9)
    f = data[:, 0] * scale
    for k in range(1, f.size):
        if not f[k] > f[k - 1]:
            raise TouchstoneError("frequencies are not strictly increasing", row_lines[k])
    if f.size and not f[0] > 0:
        raise TouchstoneError("frequencies must be positive", row_lines[0])
    vals = _pairs_to_complex(data[:, 1::2], data[:, 2::2], fmt)
    s = np.empty((f.size, 2, 2), dtype=complex)
    # v1 two-port order: S11 S21 S12 S22
    s[:, 0, 0] = vals[:, 0]
    s[:, 1, 0] = vals[:, 1]
    s[:, 0, 1] = vals[:, 2]
    s[:, 1, 1] = vals[:, 3]
    return TwoPortSpectrum(f, s, z0)


def serialize_touchstone(tp: TwoPortSpectrum) -> str:
    """Write RI-format Touchstone v1 with Hz frequencies and full precision."""
    out = ["! written by smrkit", f"# HZ S RI R {tp.z0!r}"]
    for f, s in zip(tp.frequencies, tp.s):
        vals = [s[0, 0], s[1, 0], s[0, 1], s[1, 1]]
        nums = [f"{f:.17g}"] + [f"{x:.17g}" for v in vals for x in (v.real, v.imag)]
        out.append(" ".join(nums))
    return "\n".join(out) + "\n"


def s_to_y(tp: TwoPortSpectrum) -> np.ndarray:
    """Y = (1/z0) (I - S)(I + S)^-1 per frequency point, shape (N, 2, 2)."""
    eye = np.eye(2)
    out = np.empty_like(tp.s)
    for k, s in enumerate(tp.s):
        a = eye + s
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if abs(det) < 1e-12 * max(1.0, np.abs(a).max() ** 2):
            raise ConversionSingularityError(
                f"I + S is singular at {tp.frequencies[k]:.6g} Hz", tp.frequencies[k]
            )
        # (I - S)(I + S)^-1 == ((I + S)^-T (I - S)^T)^T
        out[k] = np.linalg.solve(a.T, (eye - s).T).T / tp.z0
    return out


def y_to_s(y: np.ndarray, z0: float = 50.0) -> np.ndarray:
    """S = (I - z0 Y)(I + z0 Y)^-1 per frequency point."""
    y = np.asarray(y, dtype=complex)
    eye = np.eye(2)
    out = np.empty_like(y)
    for k, yk in enumerate(y):
        out[k] = np.linalg.solve((eye + z0 * yk).T, (eye - z0 * yk).T).T
    return out


def series_element_y(y_series) -> np.ndarray:
    """Two-port Y matrix of an admittance placed in series between the ports."""
    y_series = np.asarray(y_series, dtype=complex).reshape(-1)
    out = np.empty((y_series.size, 2, 2), dtype=complex)
    out[:, 0, 0] = out[:, 1, 1] = y_series
    out[:, 0, 1] = out[:, 1, 0] = -y_series
    return out


def series_element_admittance(frequencies, y: np.ndarray) -> tuple[Spectrum, float]:
    """Reduce a two-port Y to the admittance of a series-connected device.

    Returns the spectrum of -(Y12 + Y21)/2 and the largest |Y12 - Y21|,
    which is zero for a perfectly reciprocal measurement.
    """
    y = np.asarray(y, dtype=complex)
    y12, y21 = y[:, 0, 1], y[:, 1, 0]
    asym = float(np.max(np.abs(y12 - y21))) if y.shape[0] else 0.0
    return Spectrum(frequencies, -(y12 + y21) / 2), asym


def export_spectrum(sp: Spectrum, kind: str = "csv") -> str:
    if kind != "csv":
        raise InputError(f"unsupported export format {kind!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for f, v in zip(sp.frequencies, sp.values):
        w.writerow([f"{x:.17g}" for x in (f, v.real, v.imag, abs(v), np.degrees(np.angle(v)))])
    return buf.getvalue()


def read_spectrum_csv(text: str) -> Spectrum:
    """Inverse of ``export_spectrum``; uses the re/im columns only."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty CSV file") from None
    header = [h.strip() for h in header]
    for col in ("freq_hz", "re_y", "im_y"):
        if col not in header:
            raise InputError(f"CSV is missing column {col!r}")
    i_f, i_re, i_im = (header.index(c) for c in ("freq_hz", "re_y", "im_y"))
    f, v = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            f.append(float(row[i_f]))
            v.append(complex(float(row[i_re]), float(row[i_im])))
        except (ValueError, IndexError):
            raise InputError(f"line {lineno}: malformed CSV row") from None
    try:
        return Spectrum(np.array(f), np.array(v, dtype=complex))
    except ValueError as exc:
        raise InputError(str(exc)) from None
