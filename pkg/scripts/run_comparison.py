#!/usr/bin/env python3
"""Method-comparison grid over synthetic instances.

Writes <out>.summary.csv (per-cell means) and <out>.instances.csv (per-run
rows) for dca-L/M/R and the relaxation baseline, then prints the summary.
"""

import argparse
import sys
from pathlib import Path

from cgmflow.cli import main as cli_main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-states", type=int, nargs="+", default=[10, 20])
    parser.add_argument("--populations", type=int, nargs="+", default=[10, 100])
    parser.add_argument("--potentials", nargs="+", default=["uniform", "distance"])
    parser.add_argument("--instances", type=int, default=10)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=Path, default=Path("comparison"))
    args = parser.parse_args(argv)

    cmd = [
        "compare",
        "--n-states", *map(str, args.n_states),
        "--populations", *map(str, args.populations),
        "--potentials", *args.potentials,
        "--instances", str(args.instances),
        "--out", str(args.out),
    ]
    if args.workers is not None:
        cmd += ["--workers", str(args.workers)]
    code = cli_main(cmd)
    if code == 0:
        print(Path(f"{args.out}.summary.csv").read_text())
    return code


if __name__ == "__main__":
    sys.exit(run())
