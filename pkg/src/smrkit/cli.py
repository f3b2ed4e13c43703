"""Command-line front end.

Every subcommand writes its files into one run directory (``--out``) along
with ``manifest.json`` recording the inputs (with SHA-256), the arguments
and the tool version. Exit codes: 0 success, 1 input error, 2 numeric
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace
from importlib.resources import files
from pathlib import Path

import numpy as np

from smrkit import __version__
from smrkit.bragg import DEFAULT_STOPBAND_THRESHOLD, design_mirror, mirror_reflectance, numeric_fbw
from smrkit.core import Material, acoustic_impedance
from smrkit.exceptions import InputError, NumericError
from smrkit.inverse import extract_parameters, parse_problem_file
from smrkit.mbvd import WEIGHTS, fit_mbvd
from smrkit.metrics import bode_q, find_resonances
from smrkit.spectra_io import (
    export_spectrum,
    parse_touchstone,
    read_spectrum_csv,
    s_to_y,
    series_element_admittance,
)
from smrkit.stackfile import format_layers, format_material, parse_materials_file, parse_stack_file
from smrkit.tmm import admittance_spectrum, apply_parasitics
from smrkit.units import format_grid, parse_grid, parse_quantity

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for numeric failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def sample_materials_text() -> str:
    return files("smrkit").joinpath("data", "materials.txt").read_text()


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {path}")
    return p.read_text()


def _library(args) -> dict[str, Material]:
    text = _read(args.materials) if args.materials else sample_materials_text()
    return parse_materials_file(text)


def _frequency(text: str) -> float:
    try:
        return parse_quantity(text, "frequency")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(text: str) -> np.ndarray:
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _quantity(dimension):
    def conv(text):
        try:
            value = parse_quantity(text, dimension)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
        if value < 0:
            raise argparse.ArgumentTypeError("must be >= 0")
        return value

    return conv


def _fmt(x) -> str:
    return f"{x:.17g}"


class Run:
    """Collects output files and writes them with a manifest."""

    def __init__(self, args, argv):
        self.out = Path(args.out)
        self.args = args
        self.argv = list(argv)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def record_input(self, path: str):
        self.inputs[path] = hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def write(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        self.outputs.append(name)

    def finish(self):
        flags = {k: v for k, v in vars(self.args).items() if k != "func"}
        manifest = {
            "tool": "smrkit",
            "version": __version__,
            "subcommand": self.args.command,
            "argv": self.argv,
            "flags": {k: (format_grid(v) if isinstance(v, np.ndarray) else v) for k, v in sorted(flags.items())},
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
        }
        self.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resonance_csv(pairs) -> str:
    lines = ["fs_hz,fp_hz,prominence_db,k2_fsfp"]
    for p in pairs:
        fp = "" if p.fp is None else _fmt(p.fp)
        k2 = "" if p.k2 is None else _fmt(p.k2)
        lines.append(f"{_fmt(p.fs)},{fp},{_fmt(p.prominence)},{k2}")
    return "\n".join(lines) + "\n"


def _print_resonances(pairs, out):
    if not pairs:
        print("no resonances above the prominence threshold", file=out)
    for n, p in enumerate(pairs, 1):
        fp = "-" if p.fp is None else f"{p.fp / 1e9:.3f} GHz"
        k2 = "-" if p.k2 is None else f"{100 * p.k2:.2f} %"
        print(f"mode {n}: fs = {p.fs / 1e9:.3f} GHz  fp = {fp}  k2(fs,fp) = {k2}  prominence = {p.prominence:.2f} dB", file=out)


# -- subcommands -------------------------------------------------------------


def cmd_design_mirror(args, run: Run, out) -> int:
    lib = _library(args)
    names = [args.low, args.high, args.substrate, args.cavity]
    for name in names:
        if name not in lib:
            raise InputError(f"unknown material {name!r}; available: {', '.join(sorted(lib))}")
    low, high = lib[args.low], lib[args.high]
    spec = design_mirror(low, high, args.f0, args.pairs)
    grid = args.grid if args.grid is not None else np.linspace(0.02 * args.f0, 2 * args.f0, 2000)

    def lossless(m):
        return replace(m, q_mech=math.inf)

    if args.lossless:
        spec_eval = replace(spec, low_material=lossless(low), high_material=lossless(high))
        sub, cav = lossless(lib[args.substrate]), lossless(lib[args.cavity])
    else:
        spec_eval, sub, cav = spec, lib[args.substrate], lib[args.cavity]
    gamma = mirror_reflectance(spec_eval, sub, cav, grid)

    print(f"{low.name} (low Z): t = {spec.t_low * 1e9:.2f} nm", file=out)
    print(f"{high.name} (high Z): t = {spec.t_high * 1e9:.2f} nm", file=out)
    print(f"pairs = {spec.pairs:g}, terminated on {low.name if spec.termination == 'low' else high.name} "
          f"({len(spec.layers())} layers)", file=out)
    print(f"Z_low = {acoustic_impedance(low) / 1e6:.2f} MRayl, Z_high = {acoustic_impedance(high) / 1e6:.2f} MRayl", file=out)
    print(f"fractional stopband (closed form) = {100 * spec.fbw:.1f} %", file=out)
    try:
        fbw = numeric_fbw(gamma, args.f0, args.threshold)
        print(f"fractional stopband (|Gamma| >= {args.threshold:g}) = {100 * fbw:.1f} %", file=out)
    except InputError as exc:
        print(f"numeric stopband not available: {exc}", file=out)

    fragment = ["# quarter-wave mirror, cavity side first", "[materials]"]
    fragment += [format_material(m) for m in (low, high)]
    fragment += ["", "[stack]"] + format_layers(spec.layers()) + [""]
    run.write("mirror.stack", "\n".join(fragment))
    rows = ["freq_hz,re_gamma,im_gamma,mag_gamma,phase_deg"]
    for f, g in zip(gamma.frequencies, gamma.values):
        rows.append(",".join(_fmt(v) for v in (f, g.real, g.imag, abs(g), np.degrees(np.angle(g)))))
    run.write("reflectance.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_simulate(args, run: Run, out) -> int:
    stack = parse_stack_file(_read(args.stack), _library(args))
    run.record_input(args.stack)
    if args.q is not None:
        stack = stack.with_uniform_q(args.q)
    sp = admittance_spectrum(stack, args.grid)
    if args.rs or args.ls or args.cfeed:
        sp = apply_parasitics(sp, args.rs, args.ls, args.cfeed)
    pairs = find_resonances(sp, args.prominence)
    _print_resonances(pairs, out)
    if sp.flagged.any():
        print(f"warning: {int(sp.flagged.sum())} grid points sat on a pole and were nudged", file=out)
    run.write("admittance.csv", export_spectrum(sp))
    run.write("resonances.csv", _resonance_csv(pairs))
    return EXIT_OK


def _load_series_spectrum(path: str, out):
    text = _read(path)
    if path.lower().endswith(".csv"):
        return read_spectrum_csv(text), None
    tp = parse_touchstone(text)
    sp, asym = series_element_admittance(tp.frequencies, s_to_y(tp))
    print(f"series-element reduction: max |Y12 - Y21| = {asym:.3g} S", file=out)
    return sp, tp.z0


def cmd_analyze(args, run: Run, out) -> int:
    sp, z0_file = _load_series_spectrum(args.input, out)
    run.record_input(args.input)
    z0 = args.z0 if args.z0 is not None else (z0_file or 50.0)
    pairs = find_resonances(sp, args.prominence)
    _print_resonances(pairs, out)
    bq = bode_q(sp, z0)
    if math.isnan(bq.q_peak):
        print("Bode Q: every point flagged (lossless or active data)", file=out)
    else:
        print(f"Bode Q peak = {bq.q_peak:.2f} at {bq.f_peak / 1e9:.3f} GHz; f*Q = {bq.fq_product:.3g} Hz", file=out)
    run.write("y_series.csv", export_spectrum(sp))
    run.write("resonances.csv", _resonance_csv(pairs))
    rows = ["freq_hz,q_bode,flagged"]
    for f, q, fl in zip(bq.frequencies, bq.q, bq.flagged):
        rows.append(f"{_fmt(f)},{'' if fl else _fmt(q)},{int(fl)}")
    run.write("bode_q.csv", "\n".join(rows) + "\n")
    run.write(
        "summary.txt",
        f"z0 = {_fmt(z0)}\nf_peak = {_fmt(bq.f_peak)}\nq_peak = {_fmt(bq.q_peak)}\nfq_product = {_fmt(bq.fq_product)}\n",
    )
    return EXIT_OK


def cmd_fit_bvd(args, run: Run, out) -> int:
    sp, _ = _load_series_spectrum(args.input, out)
    run.record_input(args.input)
    if args.fmin is not None or args.fmax is not None:
        sp = sp.window(args.fmin or 0.0, args.fmax or math.inf)
    report = fit_mbvd(sp, args.branches, args.weights)
    m = report.model
    print(f"converged = {report.converged} after {report.iterations} evaluations, residual rms = {report.residual_rms:.3g}", file=out)
    print(f"Rs = {m.rs:.3f} ohm, Ls = {m.ls * 1e9:.4f} nH, C0 = {m.c0 * 1e15:.3f} fF", file=out)
    for n, b in enumerate(m.branches, 1):
        print(f"branch {n}: fs = {b.fs / 1e9:.3f} GHz, k2 = {100 * b.k2:.3f} %, Q = {b.q:.1f}", file=out)
    run.write("fit_report.txt", report.to_text())
    run.write("fit_overlay.csv", report.overlay_csv(sp))
    return EXIT_OK if report.converged else EXIT_NUMERIC


def cmd_extract(args, run: Run, out) -> int:
    problem = parse_problem_file(_read(args.problem), _library(args))
    run.record_input(args.problem)
    result = extract_parameters(problem)
    lines = []
    for u, v in zip(problem.unknowns, result.estimate):
        scale, unit = (1e9, "nm") if u.parameter == "thickness" else (1.0, "m/s")
        print(f"layer {u.layer} {u.parameter} = {v * scale:.3f} {unit}", file=out)
        lines.append(f"layer{u.layer}_{u.parameter} = {_fmt(v)}")
    print(f"residual = {result.residual:.4g} ({result.evaluations} model evaluations)", file=out)
    for order, meas, model, rel, _ in result.table:
        shown = "missing" if model is None else f"{model / 1e9:.3f} GHz ({100 * rel:+.2f} %)"
        print(f"  mode {order}: measured {meas / 1e9:.3f} GHz, model {shown}", file=out)
    for w in result.warnings:
        print(f"warning: {w}", file=out)
    lines.append(f"residual = {_fmt(result.residual)}")
    lines += [f"warning = {w}" for w in result.warnings]
    run.write("estimate.txt", "\n".join(lines) + "\n")
    run.write("diagnostics.csv", result.diagnostics_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smrkit", description="Design, simulate and characterise solidly mounted BAW resonators.")
    parser.add_argument("--version", action="version", version=f"smrkit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def common(p):
        p.add_argument("--out", default="smrkit_run", help="run directory for all outputs (default: smrkit_run)")
        p.add_argument("--materials", help="materials file (default: bundled sample library)")

    p = sub.add_parser("design-mirror", help="quarter-wave Bragg mirror and its reflectance")
    p.add_argument("--low", required=True, help="low-impedance material name")
    p.add_argument("--high", required=True, help="high-impedance material name")
    p.add_argument("--f0", required=True, type=_frequency, help="centre frequency, e.g. 50GHz")
    p.add_argument("--pairs", required=True, type=float, help="pair count, multiple of 0.5 (e.g. 8.5)")
    p.add_argument("--substrate", default="Si", help="substrate material (default: Si)")
    p.add_argument("--cavity", default="Pt", help="material on the cavity side of the mirror (default: Pt)")
    p.add_argument("--grid", type=_grid, help="reflectance grid start:stop:points (default: 0.02*f0:2*f0:2000)")
    p.add_argument("--threshold", type=float, default=DEFAULT_STOPBAND_THRESHOLD,
                   help="|Gamma| level defining the numeric stopband edges (default: 0.9)")
    p.add_argument("--lossless", action="store_true", help="ignore material loss in the reflectance")
    common(p)
    p.set_defaults(func=cmd_design_mirror)

    p = sub.add_parser("simulate", help="Mason-model admittance of a stack file")
    p.add_argument("--stack", required=True, help="stack-definition file")
    p.add_argument("--grid", type=_grid, default=parse_grid("1GHz:67GHz:2000"),
                   help="frequency grid start:stop:points (default: 1GHz:67GHz:2000)")
    p.add_argument("--q", type=float, help="override q_mech of every material")
    p.add_argument("--rs", type=_quantity("resistance"), default=0.0, help="series routing resistance (ohm)")
    p.add_argument("--ls", type=_quantity("inductance"), default=0.0, help="series routing inductance, e.g. 0.06nH")
    p.add_argument("--cfeed", type=_quantity("capacitance"), default=0.0, help="shunt feedthrough capacitance, e.g. 5fF")
    p.add_argument("--prominence", type=float, default=1.0, help="minimum resonance prominence in dB (default: 1)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="series admittance, resonances and Bode Q of a measurement")
    p.add_argument("input", help="Touchstone v1 .s2p file (or spectrum .csv)")
    p.add_argument("--z0", type=float, help="reference impedance for Bode Q (default: from file, else 50)")
    p.add_argument("--prominence", type=float, default=1.0, help="minimum resonance prominence in dB (default: 1)")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit-bvd", help="fit a multi-branch mBVD model")
    p.add_argument("input", help="Touchstone v1 .s2p file or spectrum .csv")
    p.add_argument("--branches", type=int, required=True, help="number of motional branches")
    p.add_argument("--weights", choices=WEIGHTS, default=WEIGHTS[0], help="residual weighting (default: log-magnitude+phase)")
    p.add_argument("--fmin", type=_frequency, help="lower edge of the fitted band")
    p.add_argument("--fmax", type=_frequency, help="upper edge of the fitted band")
    common(p)
    p.set_defaults(func=cmd_fit_bvd)

    p = sub.add_parser("extract", help="estimate layer parameters from measured resonances")
    p.add_argument("--problem", required=True, help="stack file with an [inverse] section")
    common(p)
    p.set_defaults(func=cmd_extract)
    return parser


def run(argv=None, out=None) -> int:
    """Entry point; returns the exit code instead of exiting."""
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(out)
            return EXIT_INPUT
        r = Run(args, argv)
        code = args.func(args, r, out)
        r.finish()
        return code
    except NumericError as exc:
        print(f"smrkit: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except (InputError, OSError) as exc:
        print(f"smrkit: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main():
    sys.exit(run())
