"""Command-line entry point.

Exit codes: 0 success, 1 verification or run failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import analysis
from .mesh import MeshError, generate_disk_mesh, mesh_stats, serialize_mesh
from .problems import PROBLEMS, get_problem
from .schemes import ConfigError, SchemeConfig, SchemeError, Variant

SCHEMES = [v.value for v in Variant]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
        return v
    return conv


def build_parser():
    p = _Parser(prog="bulksurf",
                description="Bulk-surface splitting schemes for parabolic problems "
                            "with dynamic boundary conditions on the unit disk. "
                            "Lengths are in units of the disk radius, times in units "
                            "of the model time.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mesh", help="generate and write a disk mesh")
    m.add_argument("--target-h", type=_positive(float), required=True,
                   help="target mesh width (maximum edge length, in radii), 0 < H < 1")
    m.add_argument("--out", required=True, help="output mesh file path")

    r = sub.add_parser("run", help="one run, written as a single CSV row")
    r.add_argument("--scheme", choices=SCHEMES, default="split-b", help="time integrator")
    r.add_argument("--problem", choices=sorted(PROBLEMS), default="linear",
                   help="manufactured test problem")
    r.add_argument("--target-h", type=_positive(float), required=True,
                   help="target mesh width (in radii)")
    r.add_argument("--tau", type=_positive(float), required=True,
                   help="time step (model time units); final time / tau must be an integer")
    r.add_argument("--final-time", type=_positive(float), default=1.0,
                   help="final time T (model time units, default 1.0)")
    r.add_argument("--out", default="-", help="CSV output path, '-' for stdout (default)")

    s = sub.add_parser("sweep", help="convergence sweep over mesh levels and time steps")
    s.add_argument("--scheme", choices=SCHEMES, default="split-b", help="time integrator")
    s.add_argument("--problem", choices=sorted(PROBLEMS), default="linear",
                   help="manufactured test problem")
    s.add_argument("--h-levels", type=_positive(int), default=6,
                   help="number of mesh levels, coarsest first (h = 0.207, 0.144, ... radii)")
    s.add_argument("--tau-max", type=_positive(float), default=0.2,
                   help="largest time step (model time units, default 0.2)")
    s.add_argument("--tau-count", type=_positive(int), default=9,
                   help="number of time steps tau_max * 2^-k, k = 0..count-1 (default 9)")
    s.add_argument("--final-time", type=_positive(float), default=1.0,
                   help="final time T (model time units, default 1.0)")
    s.add_argument("--workers", type=_positive(int), default=1,
                   help="concurrent runs (default 1 for reproducible timing)")
    s.add_argument("--out", default="-", help="CSV output path, '-' for stdout (default)")

    v = sub.add_parser("verify", help="run the self-check suite")
    v.add_argument("--quick", action="store_true",
                   help="use fewer mesh levels for the trace-constant study")

    b = sub.add_parser("speedup", help="wall-time ratio monolithic / splitting")
    b.add_argument("--problem", choices=sorted(PROBLEMS), default="semilinear",
                   help="manufactured test problem (default semilinear)")
    b.add_argument("--h-levels", type=_positive(int), default=4,
                   help="number of mesh levels, coarsest first (in radii, see sweep)")
    b.add_argument("--tau-max", type=_positive(float), default=0.2,
                   help="largest time step (model time units)")
    b.add_argument("--tau-count", type=_positive(int), default=5,
                   help="number of time steps tau_max * 2^-k")
    b.add_argument("--repetitions", type=_positive(int), default=3,
                   help="timed repetitions per cell; the median is reported (default 3)")
    b.add_argument("--out", default="-", help="CSV output path, '-' for stdout (default)")
    return p


def _target(path):
    return sys.stdout if path == "-" else path


def _cmd_mesh(args):
    mesh = generate_disk_mesh(args.target_h)
    serialize_mesh(mesh, args.out)
    st = mesh_stats(mesh)
    print(f"h={st['h']:.6g} vertices={st['n_vertices']} boundary={st['n_boundary']}",
          file=sys.stderr)
    return 0


def _cmd_run(args):
    # validate the step size before any expensive work
    SchemeConfig(Variant(args.scheme), args.tau, args.final_time)
    problem = get_problem(args.problem)
    rep = analysis.run_single(problem, args.scheme, args.target_h, args.tau,
                              args.final_time)
    analysis.write_csv([rep], _target(args.out))
    return 0


def _cmd_sweep(args):
    taus = analysis.tau_grid(args.tau_max, args.tau_count)
    for tau in taus:
        SchemeConfig(Variant(args.scheme), tau, args.final_time)
    problem = get_problem(args.problem)
    reports = analysis.convergence_sweep(problem, args.scheme,
                                         analysis.h_levels(args.h_levels), taus,
                                         args.final_time, workers=args.workers)
    analysis.write_csv(reports, _target(args.out))
    return 0


def _cmd_verify(args):
    from .verification import verify

    results = verify(quick=args.quick)
    for r in results:
        print(r)
    return 0 if all(r.passed for r in results) else 1


def _cmd_speedup(args):
    taus = analysis.tau_grid(args.tau_max, args.tau_count)
    problem = get_problem(args.problem)
    cells = analysis.speedup_benchmark(problem, analysis.h_levels(args.h_levels), taus,
                                       repetitions=args.repetitions)
    analysis.write_speedup_csv(cells, _target(args.out))
    print(analysis.speedup_table(cells), file=sys.stderr)
    return 0


COMMANDS = {"mesh": _cmd_mesh, "run": _cmd_run, "sweep": _cmd_sweep,
            "verify": _cmd_verify, "speedup": _cmd_speedup}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MeshError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"bulksurf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SchemeError as exc:
        print(f"bulksurf {args.command}: failed: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
