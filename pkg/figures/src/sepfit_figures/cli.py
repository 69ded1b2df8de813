"""Command-line entry point.

Usage::

    sepfit-figures --landscape landscape_alpha_1_phi_1.csv \\
                   --landscape landscape_A_1_omega_1.csv \\
                   --trajectory ID=trajectory_ID.csv \\
                   --trajectory SD=trajectory_SD.csv \\
                   --trajectory NCG=trajectory_NCG.csv \\
                   --out figures_out

Writes one ``<landscape stem>.png`` per landscape file and, when any
trajectories are named, ``convergence.png``.  Exits 0 on success, 1 on
bad inputs.
"""

from __future__ import annotations

import argparse
import sys

from .plots import FigureSpec, plot_convergence, plot_landscape


def _name_path(value: str):
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(
            f"expected NAME=PATH, got '{value}'"
        )
    return name, path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sepfit-figures",
        description="render contour and convergence figures from fit artifacts",
    )
    parser.add_argument(
        "--landscape",
        action="append",
        default=[],
        metavar="PATH",
        help="landscape CSV to contour (repeatable)",
    )
    parser.add_argument(
        "--trajectory",
        action="append",
        default=[],
        type=_name_path,
        metavar="NAME=PATH",
        help="trajectory CSV with its display name (repeatable)",
    )
    parser.add_argument("--out", default="figures_out", metavar="DIR",
                        help="output directory (default figures_out)")
    parser.add_argument("--linear-loss", action="store_true",
                        help="plot raw loss instead of log scale")
    parser.add_argument("--dims", type=int, default=None, metavar="D",
                        help="model dimension, for axis names like alpha_2_1")
    args = parser.parse_args(argv)

    if not args.landscape and not args.trajectory:
        parser.error("nothing to plot: pass --landscape and/or --trajectory")

    try:
        spec = FigureSpec(
            landscapes=tuple(args.landscape),
            trajectories=tuple(args.trajectory),
            out_dir=args.out,
            log_scale=not args.linear_loss,
            dims=args.dims,
        )
        written = []
        if spec.landscapes:
            written.extend(plot_landscape(spec))
        if spec.trajectories:
            written.append(plot_convergence(spec))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
