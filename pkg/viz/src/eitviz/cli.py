"""Command line entry point: render one figure from a plot-spec file."""

from __future__ import annotations

import argparse
import sys

from .io import InputError
from .render import load_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eitviz",
                                     description="Render figures from solver exports")
    sub = parser.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render the figure described by a spec file")
    plot.add_argument("--spec", required=True, help="plot-spec INI file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        out = render(load_spec(args.spec))
    except InputError as exc:
        print(f"input_error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
