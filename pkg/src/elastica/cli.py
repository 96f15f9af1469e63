"""Command-line entry point.

Subcommands: ``gen``, ``align``, ``energy``, ``geodesic``, ``distmat``,
``curvature``, ``export-obj``.  Every command that writes files also writes a
JSON run manifest next to its first output (``<output>.manifest.json``) with
the full configuration echo, 64-bit content digests of inputs and outputs,
tool version, and wall time.  No command consumes entropy: identical runs on
identical inputs are bit-identical for a fixed worker count.

Exit codes: 0 success, 2 validation error (bad arguments or files),
3 numerical/degeneracy error, 4 non-convergence (iteration cap hit with the
squared gradient norm still above tolerance).
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .alignment import align_pair
from .basis import HarmonicSpec
from .errors import ElasticaError, NumericalError, ValidationError
from .io import (
    content_digest,
    export_obj,
    read_path,
    read_surface,
    write_json,
    write_path,
    write_surface,
    write_surface_text,
)
from .metric import EVALUATORS, ElasticParams, SurfacePath, path_energy
from .shapes import generate, reparameterize
from .straighten import SolverConfig, distance_matrix, geodesic_distance
from .surface import second_form_direct, second_form_polyfit

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGED = 4


def _cache_root():
    return os.environ.get("ELASTICA_CACHE", os.path.join(".", ".cache"))


def _add_metric_flags(p):
    p.add_argument("--a", type=float, default=1.0, help="area-preserving metric-change weight")
    p.add_argument("--lambda", type=float, default=0.125, dest="lam",
                   help="trace-coupling weight (b = (a + lambda)/2)")
    p.add_argument("--c", type=float, default=0.125, help="bending weight")
    p.add_argument("--pole-margin", type=int, default=3,
                   help="grid rows excluded at each pole in surface integrals")
    p.add_argument("--polyfit-radius", type=int, default=3,
                   help="neighborhood radius of the quadratic curvature fit")


def _add_solver_flags(p):
    p.add_argument("--evaluator", choices=EVALUATORS, default="k1k2")
    p.add_argument("--frames", type=int, default=7, help="frames in the solved path")
    p.add_argument("--harmonics-degree", type=int, default=5)
    p.add_argument("--time-modes", type=int, default=4)
    p.add_argument("--eps1", type=float, default=1e-4)
    p.add_argument("--eps2", type=float, default=1e-2)
    p.add_argument("--grad-tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=800)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-align", action="store_true", help="skip scale/rotation alignment")


def _params(args):
    return ElasticParams(a=args.a, lam=args.lam, c=args.c)


def _solver_config(args):
    return SolverConfig(
        params=_params(args),
        evaluator=args.evaluator,
        margin=args.pole_margin,
        harmonics=HarmonicSpec(degree=args.harmonics_degree, time_modes=args.time_modes),
        n_frames=args.frames,
        eps1=args.eps1,
        eps2=args.eps2,
        grad_tol=args.grad_tol,
        max_iter=args.max_iter,
        polyfit_radius=args.polyfit_radius,
        workers=args.workers,
        cache_dir=_cache_root(),
    )


def _config_echo(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_manifest(args, inputs, outputs, started):
    if not outputs:
        return
    manifest = {
        "command": args.command,
        "config": _config_echo(args),
        "inputs": {name: content_digest(name) for name in inputs},
        "outputs": {name: content_digest(name) for name in outputs},
        "version": __version__,
        "wall_time_s": time.perf_counter() - started,
    }
    write_json(outputs[0] + ".manifest.json", manifest)


def _breakdown_dict(bd, args, wall=None):
    payload = {
        "evaluator": bd.evaluator,
        "a": args.a,
        "lambda": args.lam,
        "c": args.c,
        "pole_margin": args.pole_margin,
        "total": bd.total,
        "terms": list(bd.terms),
        "per_frame": bd.per_frame.tolist(),
    }
    if wall is not None:
        payload["wall_time_s"] = wall
    return payload


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args):
    with open(args.recipe) as fh:
        recipe = json.load(fh)
    kind = recipe.get("kind")
    if kind == "path":
        n_u = int(recipe.get("n_u", 100))
        n_v = int(recipe.get("n_v", 100))
        first = generate(dict(recipe["from"], n_u=n_u, n_v=n_v))
        second = generate(dict(recipe["to"], n_u=n_u, n_v=n_v))
        path = SurfacePath.linear(first, second, int(recipe.get("frames", 10)))
        write_path(args.output, path)
    else:
        if kind == "reparameterized":
            surface = reparameterize(generate(recipe["base"]), recipe["recipe"])
        else:
            surface = generate(recipe)
        if args.text:
            write_surface_text(args.output, surface)
        else:
            write_surface(args.output, surface)
    return EXIT_OK, [args.recipe], [args.output]


def cmd_energy(args):
    path = read_path(args.path)
    params = _params(args)
    evaluators = list(EVALUATORS) if args.all_evaluators else [args.evaluator]
    reports = []
    for name in evaluators:
        tic = time.perf_counter()
        bd = path_energy(path, params, margin=args.pole_margin, evaluator=name,
                         polyfit_radius=args.polyfit_radius)
        reports.append(_breakdown_dict(bd, args, wall=time.perf_counter() - tic))
    payload = reports[0] if len(reports) == 1 else {"evaluators": reports}
    outputs = []
    if args.output:
        write_json(args.output, payload)
        outputs.append(args.output)
    else:
        json.dump(payload, sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK, [args.path], outputs


def cmd_align(args):
    s1 = read_surface(args.first)
    s2 = read_surface(args.second)
    f1, f2, report = align_pair(s1, s2, margin=args.pole_margin)
    write_surface(args.out1, f1)
    write_surface(args.out2, f2)
    outputs = [args.out1, args.out2]
    if args.report:
        write_json(args.report, report.to_dict())
        outputs.append(args.report)
    return EXIT_OK, [args.first, args.second], outputs


def cmd_geodesic(args):
    s1 = read_surface(args.first)
    s2 = read_surface(args.second)
    cfg = _solver_config(args)
    result = geodesic_distance(s1, s2, cfg, align=not args.no_align)
    write_path(args.output, result.path)
    outputs = [args.output]
    trace_payload = result.trace.to_dict()
    trace_payload["distance"] = result.distance
    if result.alignment is not None:
        trace_payload["alignment"] = result.alignment.to_dict()
    if args.trace:
        write_json(args.trace, trace_payload)
        outputs.append(args.trace)
    if args.obj_dir:
        os.makedirs(args.obj_dir, exist_ok=True)
        for k in range(result.path.n_frames):
            name = os.path.join(args.obj_dir, f"frame_{k:03d}.obj")
            export_obj(name, result.path.frame(k))
            outputs.append(name)
    print(f"distance {result.distance!r} ({result.trace.stop_reason})")
    code = EXIT_OK
    if not result.trace.converged and result.trace.stop_reason == "max_iter":
        code = EXIT_NONCONVERGED
    return code, [args.first, args.second], outputs


def cmd_distmat(args):
    names = sorted(
        f for f in os.listdir(args.directory)
        if f.endswith(".gis") or f.endswith(".gis.txt")
    )
    if len(names) < 2:
        raise ValidationError(f"need at least two surfaces in {args.directory}")
    surfaces = [read_surface(os.path.join(args.directory, n)) for n in names]
    cfg = _solver_config(args)
    matrix, results = distance_matrix(surfaces, cfg, align=not args.no_align,
                                      workers=args.workers)
    with open(args.output, "w") as fh:
        fh.write("name," + ",".join(names) + "\n")
        for i, row_name in enumerate(names):
            fh.write(row_name + "," + ",".join(repr(x) for x in matrix[i]) + "\n")
    outputs = [args.output]
    nonconverged = [
        [i, j] for (i, j), res in sorted(results.items())
        if not res.trace.converged and res.trace.stop_reason == "max_iter"
    ]
    if args.run_report:
        payload = {
            "files": names,
            "matrix": matrix.tolist(),
            "nonconverged_pairs": nonconverged,
            "iterations": {f"{i},{j}": res.trace.iterations for (i, j), res in sorted(results.items())},
        }
        write_json(args.run_report, payload)
        outputs.append(args.run_report)
    inputs = [os.path.join(args.directory, n) for n in names]
    return (EXIT_NONCONVERGED if nonconverged else EXIT_OK), inputs, outputs


def cmd_curvature(args):
    surface = read_surface(args.surface)
    if args.estimator == "direct":
        forms = second_form_direct(surface)
    else:
        forms = second_form_polyfit(surface, k=args.polyfit_radius)

    def listify(arr):
        return [[None if not math.isfinite(x) else x for x in row] for row in arr.tolist()]

    payload = {
        "n_u": surface.n_u,
        "n_v": surface.n_v,
        "estimator": args.estimator,
        "k1": listify(forms.k1),
        "k2": listify(forms.k2),
        "H": listify(forms.H),
        "K": listify(forms.K),
    }
    write_json(args.output, payload)
    return EXIT_OK, [args.surface], [args.output]


def cmd_export_obj(args):
    surface = read_surface(args.surface)
    scalar = None
    if args.scalar != "none":
        if args.scalar == "pole_distance":
            scalar = np.linalg.norm(surface.points - surface.points[0, 0], axis=2)
        else:
            forms = (
                second_form_direct(surface)
                if args.estimator == "direct"
                else second_form_polyfit(surface, k=args.polyfit_radius)
            )
            scalar = {"k1": forms.k1, "k2": forms.k2, "H": forms.H, "K": forms.K}[args.scalar]
    export_obj(args.output, surface, scalar=scalar)
    return EXIT_OK, [args.surface], [args.output]


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="elastica",
        description="Gauge-invariant elastic energies, lengths, and geodesics "
                    "between spherically parameterized surfaces.",
    )
    parser.add_argument("--version", action="version", version=f"elastica {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a surface or path from a JSON recipe")
    p.add_argument("--recipe", required=True, help="recipe JSON file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--text", action="store_true", help="write the text variant")
    p.add_argument("--seedless", action="store_true",
                   help="assert the run consumes no entropy (always true)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("energy", help="evaluate path energy from a GIP1 file")
    p.add_argument("path")
    p.add_argument("-o", "--output", help="report JSON (stdout when omitted)")
    p.add_argument("--evaluator", choices=EVALUATORS, default="i2")
    p.add_argument("--all-evaluators", action="store_true")
    p.add_argument("--seedless", action="store_true")
    _add_metric_flags(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("align", help="volume/moment alignment of two surfaces")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--out1", required=True)
    p.add_argument("--out2", required=True)
    p.add_argument("--report")
    p.add_argument("--seedless", action="store_true")
    _add_metric_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("geodesic", help="straighten a path between two surfaces")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("-o", "--output", required=True, help="GIP1 output path")
    p.add_argument("--trace", help="solver trace JSON")
    p.add_argument("--obj-dir", help="export per-frame OBJ meshes here")
    p.add_argument("--seedless", action="store_true")
    _add_metric_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("distmat", help="pairwise geodesic distance matrix")
    p.add_argument("directory", help="directory of .gis/.gis.txt surfaces")
    p.add_argument("-o", "--output", required=True, help="CSV matrix output")
    p.add_argument("--run-report", help="JSON run manifest with the matrix")
    p.add_argument("--seedless", action="store_true")
    _add_metric_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("curvature", help="export curvature fields as JSON")
    p.add_argument("surface")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--estimator", choices=("direct", "polyfit"), default="direct")
    p.add_argument("--seedless", action="store_true")
    _add_metric_flags(p)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("export-obj", help="export the quad-split mesh as OBJ")
    p.add_argument("surface")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--scalar", choices=("none", "k1", "k2", "H", "K", "pole_distance"),
                   default="none")
    p.add_argument("--estimator", choices=("direct", "polyfit"), default="direct")
    p.add_argument("--seedless", action="store_true")
    _add_metric_flags(p)
    p.set_defaults(func=cmd_export_obj)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        code, inputs, outputs = args.func(args)
        _write_manifest(args, inputs, outputs, started)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return code


if __name__ == "__main__":
    sys.exit(main())
