#!/usr/bin/env python3
"""Interpolate a corner-to-corner population movement on a grid.

Builds the two endpoint histograms, runs the interpolate subcommand, and
prints the per-layer histograms with sub-1e-2 entries blanked.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from cgmflow.cli import main as cli_main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--width", type=int, default=5)
    parser.add_argument("--height", type=int, default=5)
    parser.add_argument("--population", type=int, default=20)
    parser.add_argument("--n-steps", type=int, default=6)
    parser.add_argument("--method", choices=["dca", "baseline"], default="dca")
    parser.add_argument("--out", type=Path, default=None,
                        help="output prefix (default: a temporary directory)")
    args = parser.parse_args(argv)

    cells = args.width * args.height
    first = [0] * cells
    last = [0] * cells
    first[0] = args.population
    last[-1] = args.population

    workdir = args.out.parent if args.out else Path(tempfile.mkdtemp())
    prefix = args.out or workdir / "interp"
    first_path = workdir / "first.txt"
    last_path = workdir / "last.txt"
    first_path.write_text(" ".join(map(str, first)) + "\n")
    last_path.write_text(" ".join(map(str, last)) + "\n")

    code = cli_main(
        [
            "interpolate",
            "--grid", f"{args.width}x{args.height}",
            "--first", str(first_path),
            "--last", str(last_path),
            "--n-steps", str(args.n_steps),
            "--method", args.method,
            "--out", str(prefix),
        ]
    )
    if code != 0:
        return code

    rows = Path(f"{prefix}.display.csv").read_text().strip().splitlines()[1:]
    values = {}
    for row in rows:
        t, i, value = row.split(",")
        values[(int(t), int(i))] = float(value)
    for t in range(1, args.n_steps + 1):
        print(f"t={t}")
        for y in range(args.height):
            line = []
            for x in range(args.width):
                v = values[(t, y * args.width + x + 1)]
                line.append(f"{v:6.1f}" if v else "     .")
            print(" ".join(line))
        print()
    print(f"outputs under {prefix}.*")
    return 0


if __name__ == "__main__":
    sys.exit(run())
