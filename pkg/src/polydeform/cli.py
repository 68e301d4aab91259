"""``polydeform`` command line: label, validate, deform, metrics.

Exit codes: 0 success, 1 invalid topology or no convergence, 2 input
errors, 3 degenerate faces, 4 linear solver failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from . import __version__
from .deform import DeformConfig, SolverError, TopologyDefectWarning, deform
from .labeling import LabelError, build_chart_graph, load_labels, nearest_axis_label, save_labels, validate_topology
from .mesh import DegenerateFaceError, MeshError
from .meshio import load_mesh, save_mesh
from .metrics import format_csv, quality_report
from .report import build_report, dumps, trace_timing, write_report

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_SOLVER = 4


def _err(msg):
    print(f"polydeform: {msg}", file=sys.stderr)


def _emit(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_label(args):
    mesh = load_mesh(args.mesh)
    mesh.check_nondegenerate()
    labels = nearest_axis_label(mesh)
    save_labels(labels, args.output)
    return EXIT_OK


def cmd_validate(args):
    mesh = load_mesh(args.mesh)
    labels = load_labels(args.labels, mesh)
    report = validate_topology(build_chart_graph(mesh, labels), strict=args.strict)
    for line in report.summary_lines():
        print(line)
    if args.report:
        write_report(
            build_report("validate", {"mesh": args.mesh, "labels": args.labels}, config={"strict": args.strict}, validity=report),
            args.report,
        )
    return EXIT_OK if report.valid else EXIT_DOMAIN


def _deform_config(args):
    return DeformConfig(
        max_iterations=args.max_iter,
        angle_tolerance=args.tol_angle,
        stall_tolerance=args.tol_stall,
        refresh_weights=not args.freeze_weights,
        flatten=args.flatten,
        solver_tolerance=args.solver_tol,
    )


def cmd_deform(args):
    try:
        config = _deform_config(args)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    mesh = load_mesh(args.mesh)
    labels = load_labels(args.labels, mesh)
    mesh.check_nondegenerate()
    graph = build_chart_graph(mesh, labels)
    validity = validate_topology(graph)
    if not validity.valid:
        _err("warning: labeling violates the polycube conditions; deforming anyway")
        for line in validity.summary_lines()[1:]:
            _err("  " + line)
    inputs = {"mesh": args.mesh, "labels": args.labels}

    def report(trace, quality):
        if not args.report:
            return
        timing = None if args.no_timing or trace is None else trace_timing(trace)
        write_report(
            build_report("deform", inputs, config=config.to_dict(), validity=validity, trace=trace, quality=quality, timing=timing),
            args.report,
        )

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TopologyDefectWarning)
            out, trace = deform(mesh, labels, config)
    except SolverError as exc:
        report(exc.trace, None)
        _err(f"solver failure: {exc}")
        return EXIT_SOLVER
    save_mesh(out, args.output)
    report(trace, quality_report(mesh, out, labels, graph))
    last = trace.records[-1]
    print(f"{trace.status} after {trace.iterations} iterations, max alignment {last.max_angle:.3e} rad")
    return EXIT_OK if trace.converged else EXIT_DOMAIN


def cmd_metrics(args):
    original = load_mesh(args.original)
    deformed = load_mesh(args.deformed)
    if not original.same_connectivity(deformed):
        raise MeshError(
            f"connectivity mismatch between {args.original} ({original.n_faces} faces) "
            f"and {args.deformed} ({deformed.n_faces} faces)"
        )
    labels = load_labels(args.labels, original)
    graph = build_chart_graph(original, labels)
    quality = quality_report(original, deformed, labels, graph)
    if args.csv:
        _emit(format_csv([quality.csv_row(args.deformed)]), args.output)
    else:
        inputs = {"original": args.original, "deformed": args.deformed, "labels": args.labels}
        _emit(dumps(build_report("metrics", inputs, quality=quality)), args.output)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="polydeform", description="Polycube deformation of triangle meshes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("label", help="write nearest-axis labels for a mesh")
    s.add_argument("mesh")
    s.add_argument("-o", "--output", required=True, help="label file to write")
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("validate", help="check the polycube topology conditions")
    s.add_argument("mesh")
    s.add_argument("labels")
    s.add_argument("--strict", action="store_true", help="apply the neighbor-count check to boundary charts too")
    s.add_argument("--report", help="write a JSON report")
    s.set_defaults(func=cmd_validate)

    d = DeformConfig()
    s = sub.add_parser("deform", help="deform a mesh toward its polycube labeling")
    s.add_argument("mesh")
    s.add_argument("labels")
    s.add_argument("-o", "--output", required=True, help="deformed mesh (.obj or .off)")
    s.add_argument("--report", help="write a JSON run report")
    s.add_argument("--max-iter", type=int, default=d.max_iterations)
    s.add_argument("--tol-angle", type=float, default=d.angle_tolerance, help="radians")
    s.add_argument("--tol-stall", type=float, default=None, help="absolute; default 1e-9 x bbox diagonal")
    s.add_argument("--freeze-weights", action="store_true", help="keep the input mesh's cotangent weights")
    s.add_argument("--flatten", action="store_true", help="snap every chart onto its mean plane afterwards")
    s.add_argument("--solver-tol", type=float, default=d.solver_tolerance)
    s.add_argument("--no-timing", action="store_true", help="omit wall-clock times from the report")
    s.set_defaults(func=cmd_deform)

    s = sub.add_parser("metrics", help="compare an original and a deformed mesh")
    s.add_argument("original")
    s.add_argument("deformed")
    s.add_argument("labels")
    s.add_argument("-o", "--output", help="output file (default stdout)")
    s.add_argument("--csv", action="store_true", help="emit a CSV header and row instead of JSON")
    s.set_defaults(func=cmd_metrics)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except DegenerateFaceError as exc:
        _err(str(exc))
        return EXIT_DEGENERATE
    except (MeshError, LabelError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        _err(f"{name}: {exc.strerror or exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
