"""scarrender: render simulator artifact files into figures."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FigureSpec, HEATMAP, PROFILE, SPECTRUM
from .formats import FormatError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scarrender",
        description="Render SCARFIELD/CSV/orbit artifacts into figures")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("heatmap", help="density heatmap with optional orbit overlay")
    p.add_argument("--field", type=Path, required=True, help="SCARFIELD file")
    p.add_argument("--orbit", type=Path, default=None, help="orbit JSON overlay")
    p.add_argument("--out", type=Path, required=True, help="output image path")

    p = sub.add_parser("spectrum", help="|c_n|^2 bars with window and histogram")
    p.add_argument("--coeffs", type=Path, required=True, help="coeffs CSV")
    p.add_argument("--window", type=Path, required=True, help="spectra CSV with a window")
    p.add_argument("--histogram", type=Path, required=True,
                   help="spectra CSV with a smoothed histogram")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("profile", help="on-orbit numerical vs semiclassical profile")
    p.add_argument("--profile", type=Path, required=True, help="profile CSV")
    p.add_argument("--orbit", type=Path, default=None,
                   help="orbit JSON for conjugate-point markers")
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "heatmap":
            spec = FigureSpec(HEATMAP, {"field": args.field}, args.out,
                              orbit=args.orbit)
        elif args.command == "spectrum":
            spec = FigureSpec(SPECTRUM, {"coeffs": args.coeffs,
                                         "window": args.window,
                                         "histogram": args.histogram}, args.out)
        else:
            spec = FigureSpec(PROFILE, {"profile": args.profile}, args.out,
                              orbit=args.orbit)
        out = spec.render()
    except FormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: missing input {err.filename}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
