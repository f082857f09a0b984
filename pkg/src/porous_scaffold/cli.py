"""Command-line interface: ``porous-scaffold <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings

import numpy as np

from . import io_formats
from .analysis import mesh_statistics, porosity_sweep, sweep_csv, voxel_porosity
from .errors import FormatError, ScaffoldError
from .models import MODELS
from .pipeline import build_document, discrete_tdf, generate_scaffold
from .scaffold_mapper import validate_jacobian
from .tdf_builder import EditSet, ParametricGrid, lspia_local_modify, sym3
from .tpms_field import ImplicitFieldSpec, PeriodCoefficients, Structure, TpmsType

FUNCTIONS = {
    "sym3": sym3,
    "u": lambda u, v, w: u,
    "radial": lambda u, v, w: np.sqrt((u - 0.5) ** 2 + (v - 0.5) ** 2 + (w - 0.5) ** 2),
}
_EXPR_NAMESPACE = {name: getattr(np, name) for name in
                   ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "minimum", "maximum",
                    "pi", "tanh", "arctan2", "where", "clip")}


def _triple(text, cast=float, name="value"):
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"{name} needs 1 or 3 comma-separated numbers, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed {name}: {text!r}") from None


def _int_triple(text):
    return _triple(text, int, "resolution")


def _float_pair(text):
    parts = text.replace(",", " ").split()
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return tuple(float(p) for p in parts)


def _tpms(text):
    try:
        return TpmsType.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _structure(text):
    try:
        return Structure.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _resolution(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must be an integer, got {text!r}") from None
    if n < 2:
        raise argparse.ArgumentTypeError(f"resolution must be >= 2, got {n}")
    return n


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return n


def parse_values(text: str) -> list[float]:
    """``ramp:a:b:n`` for ``n`` evenly spaced values, else a comma list."""
    if text.startswith("ramp:"):
        try:
            _, a, b, n = text.split(":")
            return list(np.linspace(float(a), float(b), int(n)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected ramp:start:stop:count, got {text!r}") from None
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed value list {text!r}") from None


def resolve_function(name: str):
    if name in FUNCTIONS:
        return FUNCTIONS[name]
    if name.startswith("expr:"):
        code = compile(name[5:], "<fn>", "eval")
        for ident in code.co_names:
            if ident not in _EXPR_NAMESPACE and ident not in ("u", "v", "w"):
                raise ValueError(f"name {ident!r} not allowed in function expression")
        return lambda u, v, w: eval(code, {"__builtins__": {}}, dict(_EXPR_NAMESPACE, u=u, v=v, w=w))
    raise ValueError(f"unknown function {name!r}; use one of {sorted(FUNCTIONS)} or expr:<expression>")


def _periods(args, fallback=None):
    if getattr(args, "periods", None) is not None:
        return PeriodCoefficients(*args.periods)
    if getattr(args, "cells", None) is not None:
        return PeriodCoefficients.from_cells(*args.cells)
    return fallback


def _load_solid(args):
    if args.tbss:
        return io_formats.read_tbss(args.tbss)
    return MODELS[args.model]()


# --------------------------------------------------------------------------

def cmd_tdf_build(args, parser):
    if args.tbss is None and args.model is None:
        parser.error("one of --tbss or --model is required")
    if args.method == "layer" and args.values is None:
        parser.error("--values is required for the layer method")
    if args.method == "function" and args.fn is None:
        parser.error("--fn is required for the function method")
    solid = _load_solid(args)
    fn = resolve_function(args.fn) if args.fn else None
    mode = {"w": "axis-w", "onion": "onion-sides"}.get(args.axis, args.axis)
    t0 = time.perf_counter()
    grid = discrete_tdf(solid, args.method, args.grid, fn=fn, mode=mode,
                        layer_values=args.values, quantity=args.quantity)
    periods = _periods(args, PeriodCoefficients.from_cells(2, 2, 2))
    doc = build_document(solid, grid, args.tpms, periods, args.control, args.sub_interval,
                         args.tol, args.max_iters)
    data = io_formats.write_tdf(doc, args.out)
    print(f"wrote {args.out} ({len(data)} bytes) in {time.perf_counter() - t0:.2f} s")
    return 0


def _generate(doc, args):
    periods = _periods(args)
    scaffold = generate_scaffold(doc, args.tpms, args.structure, args.epsilon, args.resolution,
                                 args.threads, periods)
    if not scaffold.jacobian.positive:
        warnings.warn(str(scaffold.jacobian))
    return scaffold


def cmd_generate(args, parser):
    doc = io_formats.read_tdf(args.tdf)
    scaffold = _generate(doc, args)
    t0 = time.perf_counter()
    data = io_formats.write_stl(scaffold.physical, args.out, "ascii" if args.ascii else "binary")
    t_write = time.perf_counter() - t0
    for line in mesh_statistics(scaffold.physical).lines():
        print(line)
    tm = scaffold.timings
    print(f"timing: sample {tm['sample']:.2f} s, polygonize {tm['polygonize']:.2f} s, "
          f"map {tm['map']:.2f} s, write {t_write:.2f} s")
    print(f"wrote {args.out} ({len(data)} bytes)")
    return 0


def cmd_modify(args, parser):
    doc = io_formats.read_tdf(args.tdf)
    edits = EditSet.read(args.edits)
    grid = ParametricGrid.zeros(args.grid)
    field = lspia_local_modify(doc.tdf, grid, edits, args.tol, args.max_iters, tpms=args.tpms)
    out = args.out or args.tdf
    io_formats.write_tdf(io_formats.TdfDocument(doc.periods, field, doc.solid), out)
    changed = int(np.count_nonzero(field.coefficients != doc.tdf.coefficients))
    print(f"{len(edits)} edit(s), {changed} coefficient(s) changed; wrote {out}")
    return 0


def cmd_analyze(args, parser):
    if args.analysis == "sweep":
        periods = _periods(args, PeriodCoefficients.from_cells(2, 2, 2))
        lo, hi = args.tpms.valid_range
        cs = np.linspace(lo, hi, args.steps)
        rows = porosity_sweep(args.tpms, args.structure, periods, cs, args.resolution, args.epsilon)
        text = sweep_csv(rows)
        if args.out:
            with open(args.out, "w", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    doc = io_formats.read_tdf(args.tdf)
    spec = ImplicitFieldSpec(args.tpms, _periods(args, doc.periods), args.structure, args.epsilon)
    print(f"{voxel_porosity(spec, doc.tdf, args.resolution):.6f}")
    return 0


def cmd_convert(args, parser):
    src = args.input
    if src.lower().endswith(".stl"):
        mesh = io_formats.read_stl(src)
        io_formats.write_stl(mesh, args.output, "ascii" if args.ascii else "binary")
        print(f"wrote {args.output} ({mesh.n_triangles} triangles)")
        return 0
    doc = io_formats.read_tdf(src)
    scaffold = _generate(doc, args)
    data = io_formats.write_stl(scaffold.physical, args.output, "ascii" if args.ascii else "binary")
    print(f"wrote {args.output} ({scaffold.physical.n_triangles} triangles, {len(data)} bytes)")
    return 0


def cmd_validate(args, parser):
    try:
        doc = io_formats.read_tdf(args.file)
        solid = doc.solid
        w = doc.periods.as_tuple()
        print(f"TDF file: periods ({w[0]:.6g}, {w[1]:.6g}, {w[2]:.6g}), "
              f"TDF net {doc.tdf.shape}, TBSS net {solid.shape}")
        lo, hi = float(doc.tdf.coefficients.min()), float(doc.tdf.coefficients.max())
        print(f"TDF coefficient range [{lo:.6g}, {hi:.6g}]")
    except FormatError as tdf_err:
        try:
            solid = io_formats.read_tbss(args.file)
        except FormatError:
            raise tdf_err from None
        print(f"TBSS file: control net {solid.shape}")
    report = validate_jacobian(solid, args.samples, warn=False)
    print(report)
    if not report.positive:
        warnings.warn("solid may fold: mapped scaffolds can self-intersect")
    return 0


# --------------------------------------------------------------------------

def _add_periods(p, default_help=""):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--periods", type=_triple, metavar="WX,WY,WZ",
                   help="period coefficients (angular frequency per unit parameter)" + default_help)
    g.add_argument("--cells", type=_triple, metavar="KX,KY,KZ",
                   help="TPMS cells per direction; sets omega = 2*pi*k")


def _add_generation(p):
    p.add_argument("--tpms", type=_tpms, default=TpmsType.P, help="P, D, G or IWP (default P)")
    p.add_argument("--structure", type=_structure, default=Structure.PORE,
                   help="pore, rod or sheet (default pore)")
    p.add_argument("--epsilon", type=float, default=0.3, help="sheet thickness in field units")
    p.add_argument("--resolution", type=_resolution, default=100,
                   help="polygonization cells per direction (default 100)")
    p.add_argument("--ascii", action="store_true", help="write ASCII STL instead of binary")
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads for sampling and mapping (output is unaffected)")
    _add_periods(p, "; overrides the TDF file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="porous-scaffold",
                                     description="Heterogeneous TPMS scaffolds in B-spline solids.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tdf-build", help="build a TDF file from a solid")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--tbss", help="input solid (TBSS file)")
    src.add_argument("--model", choices=sorted(MODELS), help="built-in sample solid")
    p.add_argument("--method", choices=["filling", "layer", "function"], required=True)
    p.add_argument("--fn", help=f"function method: one of {sorted(FUNCTIONS)} or expr:<numpy expression in u,v,w>")
    p.add_argument("--axis", default="w", choices=["w", "onion", "axis-w", "onion-sides"],
                   help="layer method: layers along w, or onion layers from the side faces")
    p.add_argument("--values", type=parse_values, help="layer values: ramp:a:b:n or a,b,c,...")
    p.add_argument("--quantity", choices=["mean", "gauss"], default="mean",
                   help="filling method: boundary curvature kind")
    p.add_argument("--tpms", type=_tpms, default=TpmsType.P)
    p.add_argument("--grid", type=_int_triple, default=(50, 50, 50), help="parametric grid vertices")
    p.add_argument("--control", type=_int_triple, default=(20, 20, 20), help="TDF control net size")
    p.add_argument("--sub-interval", type=_float_pair, metavar="LO,HI",
                   help="normalize into this part of the valid threshold range")
    p.add_argument("--tol", type=float, help="LSPIA tolerance (default 1e-4 x value range)")
    p.add_argument("--max-iters", type=int, default=200)
    _add_periods(p, " (default: 2 cells per direction)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tdf_build)

    p = sub.add_parser("generate", help="generate a scaffold STL from a TDF file")
    p.add_argument("--tdf", required=True)
    _add_generation(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("modify", help="locally modify a TDF with an edit file")
    p.add_argument("--tdf", required=True)
    p.add_argument("--edits", required=True, help="lines of 'a b c value'; '#' starts a comment")
    p.add_argument("--tpms", type=_tpms, required=True, help="type whose valid range clamps the edits")
    p.add_argument("--grid", type=_int_triple, default=(50, 50, 50))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--out", help="output TDF (default: overwrite input)")
    p.set_defaults(func=cmd_modify)

    p = sub.add_parser("analyze", help="porosity sweeps and measurements")
    asub = p.add_subparsers(dest="analysis", required=True)
    s = asub.add_parser("sweep", help="porosity over the valid threshold range (CSV)")
    s.add_argument("--tpms", type=_tpms, required=True)
    s.add_argument("--structure", type=_structure, default=Structure.PORE)
    s.add_argument("--steps", type=_resolution, default=17)
    s.add_argument("--resolution", type=_resolution, default=128)
    s.add_argument("--epsilon", type=float, default=0.3)
    s.add_argument("--out")
    _add_periods(s, " (default: 2 cells per direction)")
    s.set_defaults(func=cmd_analyze)
    s = asub.add_parser("porosity", help="voxel porosity of a TDF scaffold")
    s.add_argument("--tdf", required=True)
    s.add_argument("--tpms", type=_tpms, default=TpmsType.P)
    s.add_argument("--structure", type=_structure, default=Structure.PORE)
    s.add_argument("--epsilon", type=float, default=0.3)
    s.add_argument("--resolution", type=int, default=128)
    _add_periods(s, "; overrides the TDF file")
    s.set_defaults(func=cmd_analyze)

    p = sub.add_parser("convert", help="expand a TDF file to STL, or re-encode an STL")
    p.add_argument("input")
    p.add_argument("output")
    _add_generation(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="check a TDF or TBSS file and the solid's Jacobian")
    p.add_argument("file")
    p.add_argument("--samples", type=_resolution, default=21)
    p.set_defaults(func=cmd_validate)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    previous = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        return args.func(args, parser)
    except (ScaffoldError, ValueError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        warnings.showwarning = previous


if __name__ == "__main__":
    sys.exit(main())
