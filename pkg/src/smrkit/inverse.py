"""Back-extraction of layer thicknesses or velocities from measured resonances."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from smrkit.core import Material, Stack
from smrkit.exceptions import InputError, StackFileError
from smrkit.metrics import find_resonances
from smrkit.stackfile import Statement, _assignment, _quantity, parse_document
from smrkit.tmm import admittance_spectrum
from smrkit.units import parse_grid

# contribution of a target mode that the model does not show (50 % error, squared)
MISSING_MODE_PENALTY = 0.25
GRID_POINTS = 32
MAX_SWEEPS = 8
DEFAULT_PROMINENCE_DB = 0.5
DEFAULT_GRID = "1GHz:67GHz:2000"

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class Unknown:
    layer: int
    parameter: str  # "thickness" or "velocity"
    lower: float
    upper: float

    def __post_init__(self):
        if self.parameter not in ("thickness", "velocity"):
            raise InputError(f"unknown parameter kind {self.parameter!r}")
        if not (0 < self.lower < self.upper and math.isfinite(self.upper)):
            raise InputError(f"bounds must satisfy 0 < lower < upper < inf, got ({self.lower}, {self.upper})")


@dataclass(frozen=True)
class Target:
    order: int  # 1 = first detected resonance, 2 = second, ...
    fs: float
    weight: float = 1.0

    def __post_init__(self):
        if self.order < 1:
            raise InputError("mode order starts at 1")
        if not self.fs > 0 or self.weight < 0:
            raise InputError("target needs fs > 0 and weight >= 0")


@dataclass(frozen=True, eq=False)
class InverseProblem:
    template: Stack
    unknowns: tuple[Unknown, ...]
    targets: tuple[Target, ...]
    grid: np.ndarray = field(default_factory=lambda: parse_grid(DEFAULT_GRID))
    prominence_db: float = DEFAULT_PROMINENCE_DB

    def __post_init__(self):
        object.__setattr__(self, "unknowns", tuple(self.unknowns))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if not self.unknowns:
            raise InputError("inverse problem needs at least one unknown")
        if len(self.targets) < len(self.unknowns):
            raise InputError("need at least as many targets as unknowns")
        for u in self.unknowns:
            if not 0 <= u.layer < len(self.template.layers):
                raise InputError(f"unknown refers to missing layer {u.layer}")

    def instantiate(self, x) -> Stack:
        """Template stack with the unknowns set to ``x``."""
        s = self.template
        for u, value in zip(self.unknowns, np.atleast_1d(x)):
            if u.parameter == "thickness":
                s = s.with_layer(u.layer, thickness=float(value))
            else:
                mat: Material = s.layers[u.layer].material
                s = s.with_layer(u.layer, material=replace(mat, velocity=float(value)))
        return s


def model_resonances(p: InverseProblem, x) -> list[float]:
    sp = admittance_spectrum(p.instantiate(x), p.grid)
    return [r.fs for r in find_resonances(sp, p.prominence_db)]


def resonance_residual(p: InverseProblem, x) -> float:
    """Weighted squared relative mismatch of modelled and measured resonances.

    The n-th target order is matched to the n-th detected resonance in
    frequency order. A target with no matching resonance contributes
    ``weight * MISSING_MODE_PENALTY``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    for u, v in zip(p.unknowns, x):
        if not u.lower <= v <= u.upper:
            raise InputError(f"candidate {v!r} outside bounds [{u.lower}, {u.upper}]")
    if all(t.weight == 0 for t in p.targets):
        return 0.0
    found = model_resonances(p, x)
    total = 0.0
    for t in p.targets:
        if t.order <= len(found):
            total += t.weight * ((found[t.order - 1] - t.fs) / t.fs) ** 2
        else:
            total += t.weight * MISSING_MODE_PENALTY
    return total


@dataclass(frozen=True, eq=False)
class Extraction:
    estimate: np.ndarray
    residual: float
    table: list[tuple[int, float, float | None, float | None, float]]
    warnings: list[str]
    evaluations: int

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        buf.write("mode_order,measured_hz,model_hz,rel_error,weight\n")
        for order, meas, model, rel, w in self.table:
            cells = [str(order), f"{meas:.17g}", "" if model is None else f"{model:.17g}",
                     "" if rel is None else f"{rel:.17g}", f"{w:.17g}"]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def _golden(fun, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def extract_parameters(p: InverseProblem) -> Extraction:
    """Minimise ``resonance_residual`` over the unknowns.

    Coordinate descent: along each axis, scan a 32-point grid between the
    bounds (ties go to the lowest value), then refine by golden-section
    search inside the neighbouring grid cells. With one unknown this is a
    single grid-seeded golden-section search. Sweeps repeat until no axis
    improves.
    """
    n_eval = 0

    def res(x):
        nonlocal n_eval
        n_eval += 1
        return resonance_residual(p, x)

    x = np.array([(u.lower + u.upper) / 2 for u in p.unknowns])
    best = res(x)
    for sweep in range(MAX_SWEEPS):
        improved = False
        for k, u in enumerate(p.unknowns):
            axis = np.linspace(u.lower, u.upper, GRID_POINTS)

            def along(v, k=k):
                trial = x.copy()
                trial[k] = v
                return res(trial)

            values = [along(v) for v in axis]
            i = int(np.argmin(values))
            lo, hi = axis[max(i - 1, 0)], axis[min(i + 1, axis.size - 1)]
            v, fv = _golden(along, lo, hi, tol=(u.upper - u.lower) * 1e-7)
            if values[i] <= fv:
                v, fv = axis[i], values[i]
            if fv < best - 1e-15:
                improved = True
                x[k], best = v, fv
        if not improved or len(p.unknowns) == 1:
            break

    warnings = []
    for u, v in zip(p.unknowns, x):
        span = u.upper - u.lower
        if v - u.lower <= 1e-4 * span or u.upper - v <= 1e-4 * span:
            warnings.append(f"layer {u.layer} {u.parameter} = {v:.6g} sits on a bound; widen the bounds")
    found = model_resonances(p, x)
    table = []
    for t in p.targets:
        model = found[t.order - 1] if t.order <= len(found) else None
        rel = None if model is None else (model - t.fs) / t.fs
        if model is None:
            warnings.append(f"mode {t.order} not found in the model spectrum")
        table.append((t.order, t.fs, model, rel, t.weight))
    return Extraction(x, best, table, warnings, n_eval)


def _parse_inverse_section(statements: list[Statement], template: Stack) -> InverseProblem:
    unknowns, targets = [], []
    grid = parse_grid(DEFAULT_GRID)
    prominence = DEFAULT_PROMINENCE_DB
    for stmt in statements:
        key, value = _assignment(stmt)
        if key.text == "unknown":
            if len(value) != 4:
                raise stmt.error("expected 'unknown = <layer> <thickness|velocity> <lower> <upper>'")
            try:
                layer = int(value[0].text)
            except ValueError:
                raise stmt.error("layer must be an integer index (0 = top)", value[0]) from None
            kind = value[1].text
            if kind not in ("thickness", "velocity"):
                raise stmt.error(f"unknown parameter kind {kind!r}", value[1])
            if kind == "thickness":
                lo, hi = (_quantity(stmt, tok, "length") for tok in value[2:])
            else:
                lo, hi = (float(tok.text) for tok in value[2:])
            try:
                unknowns.append(Unknown(layer, kind, lo, hi))
            except InputError as exc:
                raise stmt.error(str(exc), value[2]) from None
        elif key.text == "target":
            if len(value) not in (2, 3):
                raise stmt.error("expected 'target = <order> <frequency> [weight]'")
            try:
                order = int(value[0].text)
                weight = float(value[2].text) if len(value) == 3 else 1.0
                targets.append(Target(order, _quantity(stmt, value[1], "frequency"), weight))
            except (ValueError, InputError) as exc:
                raise stmt.error(str(exc), value[0]) from None
        elif key.text == "grid":
            try:
                grid = parse_grid(value[0].text)
            except ValueError as exc:
                raise stmt.error(str(exc), value[0]) from None
        elif key.text == "prominence":
            try:
                prominence = float(value[0].text)
            except ValueError:
                raise stmt.error("prominence must be a number (dB)", value[0]) from None
        else:
            raise stmt.error(f"unknown inverse key {key.text!r}", key)
    try:
        return InverseProblem(template, tuple(unknowns), tuple(targets), grid, prominence)
    except InputError as exc:
        raise StackFileError(str(exc), None) from None


def parse_problem_file(text: str, library: dict[str, Material] | None = None) -> InverseProblem:
    """Stack document plus an ``[inverse]`` section::

        [inverse]
        unknown = 0 thickness 15nm 45nm     # layer index, kind, bounds
        target = 1 11.72GHz                 # mode order, fs, optional weight
        grid = 1GHz:67GHz:2000
        prominence = 0.5                    # dB
    """
    stack, doc = parse_document(text, library, extra_sections=("inverse",))
    if "inverse" not in doc.sections:
        raise StackFileError("missing [inverse] section", None)
    return _parse_inverse_section(doc.sections["inverse"], stack)
