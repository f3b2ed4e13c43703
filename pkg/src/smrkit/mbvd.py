"""Multi-motional modified Butterworth-Van Dyke (mBVD) model and fitting.

Circuit: series routing resistance ``rs`` and inductance ``ls`` feeding the
static capacitance ``c0`` in parallel with one series RLC branch per mode.
Branches are parameterised by (fs, k2, q) instead of (R, L, C):

    a    = k2 * 8/pi^2
    Cm   = c0 * a / (1 - a)
    Lm   = 1 / ((2 pi fs)^2 Cm)
    Rm   = 2 pi fs Lm / q

so k2 = (pi^2/8) Cm / (c0 + Cm), which matches the fs/fp estimator
(pi^2/8)(fp^2 - fs^2)/fp^2 for an isolated branch.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import peak_widths

from smrkit.exceptions import InputError, InsufficientPeaksError
from smrkit.metrics import PI2_8, coupling_from_fsfp, find_resonances
from smrkit.spectrum import Spectrum

MAX_NFEV = 500
GTOL = 1e-10
SEED_PROMINENCE_DB = 0.1

# fit variables are scaled to O(1) units: ohm, nH, fF, then GHz, %, 1 per branch
_GLOBAL_SCALE = (1.0, 1e-9, 1e-15)
_BRANCH_SCALE = (1e9, 1e-2, 1.0)


@dataclass(frozen=True)
class Branch:
    fs: float
    k2: float
    q: float

    def __post_init__(self):
        if not self.fs > 0:
            raise InputError(f"branch fs must be > 0, got {self.fs!r}")
        if not 0 < self.k2 < 1:
            raise InputError(f"branch k2 must lie in (0, 1), got {self.k2!r}")
        if not self.q > 0:
            raise InputError(f"branch q must be > 0, got {self.q!r}")


@dataclass(frozen=True)
class MBVDModel:
    rs: float
    ls: float
    c0: float
    branches: tuple[Branch, ...] = ()

    def __post_init__(self):
        if self.rs < 0 or self.ls < 0:
            raise InputError("rs and ls must be >= 0")
        if not self.c0 > 0:
            raise InputError("c0 must be > 0")
        branches = tuple(b if isinstance(b, Branch) else Branch(*b) for b in self.branches)
        object.__setattr__(self, "branches", tuple(sorted(branches, key=lambda b: b.fs)))

    def motional(self) -> list[tuple[float, float, float]]:
        """(R, L, C) of each motional branch."""
        return [branch_to_rlc(self.c0, b) for b in self.branches]


def branch_to_rlc(c0: float, b: Branch) -> tuple[float, float, float]:
    a = b.k2 / PI2_8
    cm = c0 * a / (1 - a)
    ws = 2 * math.pi * b.fs
    lm = 1 / (ws * ws * cm)
    return ws * lm / b.q, lm, cm


def rlc_to_branch(c0: float, r: float, l: float, c: float) -> Branch:
    ws = 1 / math.sqrt(l * c)
    return Branch(fs=ws / (2 * math.pi), k2=PI2_8 * c / (c0 + c), q=ws * l / r)


def _core_admittance(w, c0, branches):
    yc = 1j * w * c0
    for b in branches:
        r, l, c = branch_to_rlc(c0, b)
        yc = yc + 1 / (r + 1j * w * l + 1 / (1j * w * c))
    return yc


def mbvd_admittance(m: MBVDModel, grid) -> Spectrum:
    grid = np.asarray(grid, dtype=float)
    w = 2 * np.pi * grid
    y = _core_admittance(w, m.c0, m.branches)
    if m.rs or m.ls:
        y = 1 / (m.rs + 1j * w * m.ls + 1 / y)
    return Spectrum(grid, y)


# -- parameter vector --------------------------------------------------------


def _scales(n: int) -> np.ndarray:
    return np.array(_GLOBAL_SCALE + _BRANCH_SCALE * n)


def pack(m: MBVDModel) -> np.ndarray:
    """Model to scaled parameter vector [rs, ls, c0, (fs, k2, q)...]."""
    raw = [m.rs, m.ls, m.c0]
    for b in m.branches:
        raw += [b.fs, b.k2, b.q]
    return np.array(raw) / _scales(len(m.branches))


def unpack(x, n: int) -> MBVDModel:
    v = np.asarray(x, dtype=float) * _scales(n)
    branches = tuple(Branch(*map(float, v[3 + 3 * i : 6 + 3 * i])) for i in range(n))
    return MBVDModel(float(v[0]), float(v[1]), float(v[2]), branches)


def parameter_names(n: int) -> list[str]:
    names = ["rs", "ls", "c0"]
    for i in range(1, n + 1):
        names += [f"fs{i}", f"k2_{i}", f"q{i}"]
    return names


def _bounds(n: int) -> tuple[np.ndarray, np.ndarray]:
    lo = [0.0, 0.0, 1e-9] + [1e-6, 1e-6, 1e-3] * n
    hi = [np.inf, np.inf, np.inf] + [np.inf, 99.9, np.inf] * n
    return np.array(lo), np.array(hi)


def model_and_jacobian(x, w: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Admittance and its derivatives w.r.t. the scaled parameter vector.

    Returns Y with shape (N,) and dY/dx with shape (N, 3 + 3n).
    """
    v = np.asarray(x, dtype=float) * _scales(n)
    rs, ls, c0 = v[:3]
    jac = np.empty((w.size, v.size), dtype=complex)
    yc = 1j * w * c0
    dyc_dc0 = 1j * w + 0j
    for i in range(n):
        fs, k2, q = v[3 + 3 * i : 6 + 3 * i]
        ws = 2 * math.pi * fs
        a = k2 / PI2_8
        cm = c0 * a / (1 - a)
        g = 1 / (ws * q) + 1j * (w / ws**2 - 1 / w)
        yb = cm / g
        yc = yc + yb
        dyc_dc0 = dyc_dc0 + yb / c0
        dg_dws = -1 / (ws**2 * q) - 2j * w / ws**3
        jac[:, 3 + 3 * i] = -cm / g**2 * dg_dws * 2 * math.pi
        jac[:, 4 + 3 * i] = (1 / g) * c0 / (1 - a) ** 2 / PI2_8
        jac[:, 5 + 3 * i] = cm / (g**2 * ws * q**2)
    jac[:, 2] = dyc_dc0
    y = 1 / (rs + 1j * w * ls + 1 / yc)
    core = (y / yc) ** 2
    jac[:, 2:] *= core[:, None]
    jac[:, 0] = -(y**2)
    jac[:, 1] = -(y**2) * 1j * w
    return y, jac * _scales(n)


WEIGHTS = ("log-magnitude+phase", "uniform")


def residual_and_jacobian(x, sp: Spectrum, n: int, weights: str = "log-magnitude+phase"):
    """Real residual vector and Jacobian for the fit.

    ``log-magnitude+phase``: residual log(Y_model / Y_data), split into the
    log-magnitude (real) and wrapped phase (imaginary, rad) parts.
    ``uniform``: (Y_model - Y_data) / rms|Y_data|, split into Re and Im.
    """
    y, dy = model_and_jacobian(x, sp.omega, n)
    if weights == "log-magnitude+phase":
        r = np.log(y / sp.values)
        jr = dy / y[:, None]
    elif weights == "uniform":
        scale = math.sqrt(float(np.mean(np.abs(sp.values) ** 2)))
        r = (y - sp.values) / scale
        jr = dy / scale
    else:
        raise InputError(f"unknown weighting {weights!r}; choose from {WEIGHTS}")
    return np.concatenate([r.real, r.imag]), np.vstack([jr.real, jr.imag])


def objective(x, sp: Spectrum, n: int, weights: str = "log-magnitude+phase") -> float:
    r, _ = residual_and_jacobian(x, sp, n, weights)
    return 0.5 * float(r @ r)


def objective_gradient(x, sp: Spectrum, n: int, weights: str = "log-magnitude+phase") -> np.ndarray:
    r, j = residual_and_jacobian(x, sp, n, weights)
    return j.T @ r


# -- initialisation ----------------------------------------------------------


def _low_frequency_capacitance(sp: Spectrum) -> float:
    k = max(3, sp.frequencies.size // 20)
    w = sp.omega[:k]
    b = sp.values[:k].imag
    # least-squares slope of Im(Y) against omega through the origin
    return float(w @ b / (w @ w))


def _smooth(values: np.ndarray) -> np.ndarray:
    n = values.size
    k = max(1, n // 200) | 1
    if k == 1:
        return values
    kernel = np.ones(k) / k
    padded = np.concatenate([np.full(k // 2, values[0]), values, np.full(k // 2, values[-1])])
    return np.convolve(padded, kernel, mode="valid")


def init_mbvd(sp: Spectrum, n_branches: int) -> MBVDModel:
    """Starting point for ``fit_mbvd`` read off the spectrum.

    rs is Re(Z) at the top of the band and ls = 0. The series rs is then
    removed from a lightly smoothed copy of the data and, on that core
    admittance, branch fs come from the ``n_branches`` most prominent
    resonances, k2 from the fs/fp spacing, and q from the -3 dB width of
    each |Y| peak. c0 is the low-frequency slope of Im(Y)/omega less the
    seeded motional capacitances.
    """
    if n_branches < 0:
        raise InputError("n_branches must be >= 0")
    if len(sp) < 3:
        raise InputError("need at least 3 points to initialise a fit")
    c_low = _low_frequency_capacitance(sp)
    if not c_low > 0:
        raise InputError("Im(Y) is not capacitive at low frequency; cannot seed c0")
    k = max(1, sp.frequencies.size // 50)
    rs = max(0.0, float(np.median((1 / sp.values[-k:]).real)))
    if n_branches == 0:
        return MBVDModel(rs, 0.0, c_low)

    core = sp.with_values(1 / (1 / _smooth(sp.values) - rs))
    pairs = find_resonances(core, SEED_PROMINENCE_DB)
    if len(pairs) < n_branches:
        raise InsufficientPeaksError(f"found {len(pairs)} resonances, need {n_branches}")
    chosen = sorted(sorted(pairs, key=lambda p: -p.prominence)[:n_branches], key=lambda p: p.fs)

    f = core.frequencies
    db = core.magnitude_db
    idx = [int(np.argmin(np.abs(f - p.fs))) for p in chosen]
    branches = []
    for n, (p, i) in enumerate(zip(chosen, idx)):
        stop = idx[n + 1] if n + 1 < len(idx) else f.size
        j = i + 1 + int(np.argmin(db[i + 1 : stop])) if stop > i + 1 else i
        k2 = coupling_from_fsfp(p.fs, f[j]) if f[j] > p.fs else 0.01
        k2 = min(max(k2, 1e-4), 0.3)
        rel = min(1.0, 3.0 / p.prominence)
        _, _, left, right = peak_widths(db, [i], rel_height=rel)
        grid_idx = np.arange(f.size)
        df = np.interp(right[0], grid_idx, f) - np.interp(left[0], grid_idx, f)
        q = p.fs / df if df > 0 else 100.0
        branches.append(Branch(float(p.fs), float(k2), float(min(max(q, 1.0), 1e4))))
    ratio = sum((b.k2 / PI2_8) / (1 - b.k2 / PI2_8) for b in branches)
    return MBVDModel(rs, 0.0, c_low / (1 + ratio), tuple(branches))


# -- fitting -----------------------------------------------------------------


@dataclass(frozen=True)
class FitReport:
    model: MBVDModel
    residual_rms: float
    iterations: int
    converged: bool
    message: str
    weights: str
    parameters: dict[str, float] = field(default_factory=dict)
    bounds_hit: dict[str, bool] = field(default_factory=dict)
    initial: MBVDModel | None = None

    def to_text(self) -> str:
        """Key-value serialisation, one ``key = value`` per line."""
        lines = [
            f"converged = {str(self.converged).lower()}",
            f"message = {self.message}",
            f"iterations = {self.iterations}",
            f"residual_rms = {self.residual_rms:.17g}",
            f"weights = {self.weights}",
            f"branches = {len(self.model.branches)}",
        ]
        for name, value in self.parameters.items():
            lines.append(f"{name} = {value:.17g}")
        hit = [n for n, h in self.bounds_hit.items() if h]
        lines.append(f"bounds_hit = {','.join(hit) if hit else 'none'}")
        return "\n".join(lines) + "\n"

    def overlay_csv(self, sp: Spectrum) -> str:
        """Measured and fitted admittance on the data grid."""
        model = mbvd_admittance(self.model, sp.frequencies).values
        buf = io.StringIO()
        buf.write("freq_hz,re_y_data,im_y_data,re_y_model,im_y_model,mag_db_data,mag_db_model,phase_deg_data,phase_deg_model\n")
        for f, d, m in zip(sp.frequencies, sp.values, model):
            row = (f, d.real, d.imag, m.real, m.imag, 20 * math.log10(abs(d)), 20 * math.log10(abs(m)),
                   math.degrees(np.angle(d)), math.degrees(np.angle(m)))
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()


def parse_fit_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def fit_mbvd(
    sp: Spectrum,
    n_branches: int,
    weights: str = "log-magnitude+phase",
    initial: MBVDModel | None = None,
) -> FitReport:
    """Least-squares fit of an mBVD model to a complex admittance spectrum.

    Bounded trust-region damped least squares (scipy ``trf``) with the
    analytic Jacobian, started from ``init_mbvd`` unless ``initial`` is
    given. Non-convergence is reported, not raised.
    """
    if weights not in WEIGHTS:
        raise InputError(f"unknown weighting {weights!r}; choose from {WEIGHTS}")
    if np.any(sp.values == 0):
        raise InputError("spectrum contains zero admittance")
    start = initial if initial is not None else init_mbvd(sp, n_branches)
    if len(start.branches) != n_branches:
        raise InputError("initial model has the wrong number of branches")
    lo, hi = _bounds(n_branches)
    x0 = np.clip(pack(start), lo, hi)

    def fun(x):
        return residual_and_jacobian(x, sp, n_branches, weights)[0]

    def jac(x):
        return residual_and_jacobian(x, sp, n_branches, weights)[1]

    res = least_squares(
        fun, x0, jac=jac, bounds=(lo, hi), method="trf", x_scale="jac",
        gtol=GTOL, ftol=1e-12, xtol=1e-12, max_nfev=MAX_NFEV,
    )
    model = unpack(res.x, n_branches)
    r = res.fun
    rms = math.sqrt(float(r @ r) / r.size)
    names = parameter_names(n_branches)
    # unpack sorts branches by fs; report in that order
    values = pack(model) * _scales(n_branches)
    tol = 1e-9
    hit = {
        nm: bool(abs(x - l) <= tol * max(1.0, abs(l)) or (np.isfinite(h) and abs(x - h) <= tol * max(1.0, abs(h))))
        for nm, x, l, h in zip(names, res.x, lo, hi)
    }
    return FitReport(
        model=model,
        residual_rms=rms,
        iterations=int(res.nfev),
        converged=bool(res.status > 0 and np.isfinite(rms)),
        message=res.message,
        weights=weights,
        parameters=dict(zip(names, map(float, values))),
        bounds_hit=hit,
        initial=start,
    )
