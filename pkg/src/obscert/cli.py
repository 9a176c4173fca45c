"""Command-line entry point: analyze / sweep / plotdata."""

import argparse
import sys

from . import __version__
from .runner import EXIT_ERROR, emit_plot_data, run_analyze, run_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obscert",
        description="Observability certificates for compactly perturbed self-adjoint systems.",
    )
    parser.add_argument("--version", action="version", version=f"obscert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run the full analysis on one scenario file")
    analyze.add_argument("scenario", help="scenario JSON file")
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.add_argument("--nodes", type=int, help="contour quadrature nodes (default 64)")
    analyze.add_argument("--grid", type=int, help="Hautus scan resolution (default 200)")
    analyze.add_argument("--guard", type=int, help="guard band size (default ceil(N/4))")
    analyze.add_argument("--seed", type=int, help="seed recorded in the run manifest")
    analyze.add_argument("--strict", action="store_true", help="escalate warnings to errors")

    sweep = sub.add_parser("sweep", help="repeat the analysis over one numeric parameter")
    sweep.add_argument("scenario", help="scenario JSON file")
    sweep.add_argument("--param", required=True, help="scenario field to vary (e.g. c, N)")
    sweep.add_argument("--values", required=True, help="comma-separated numeric values")
    sweep.add_argument("--out", required=True, help="output directory")

    plot = sub.add_parser("plotdata", help="emit plain CSV series from a report directory")
    plot.add_argument("report_dir", help="directory written by analyze")
    plot.add_argument("--strict", action="store_true", help="fail on any missing input")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "analyze":
        return run_analyze(
            args.scenario,
            args.out,
            nodes=args.nodes,
            grid=args.grid,
            guard=args.guard,
            seed=args.seed,
            strict=args.strict,
        )
    if args.command == "sweep":
        try:
            values = [float(v) for v in args.values.split(",") if v.strip() != ""]
        except ValueError:
            print(f"invalid sweep values: {args.values!r}", file=sys.stderr)
            return EXIT_ERROR
        return run_sweep(args.scenario, args.param, values, args.out)
    return emit_plot_data(args.report_dir, strict=args.strict)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
