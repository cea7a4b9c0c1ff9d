#!/usr/bin/env python3
"""Benchmark fit-time scaling in N and print doubling ratios.

Thin wrapper over ``specprec bench``: runs the size grid, writes the raw
timings CSV, and prints each size's best time together with the ratio to the
previous size.  Linear-in-N scaling shows up as ratios near 2 on a doubling
grid.

Example:
    python3 scripts/run_benchmark.py --output /tmp/bench.csv \
        --n-grid 4096,8192,16384,32768,65536
"""

import argparse
import csv
import sys
from pathlib import Path

from specprec.cli import main as cli_main


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t", type=int, default=64)
    parser.add_argument("--n-grid", default="4096,8192,16384,32768,65536")
    parser.add_argument("--rho", type=float, default=1.0)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", type=Path, required=True,
                        help="raw timings CSV")
    args = parser.parse_args(argv)

    rc = cli_main(["bench", "--t", str(args.t), "--n-grid", args.n_grid,
                   "--rho", str(args.rho), "--repeats", str(args.repeats),
                   "--seed", str(args.seed), "--output", str(args.output)])
    if rc != 0:
        return rc

    with open(args.output, newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'N':>10}{'best ms':>12}{'ratio':>8}{'peak MB':>10}")
    prev = None
    for row in rows:
        best_ms = float(row["fit_seconds"]) * 1e3
        ratio = f"{best_ms / prev:.2f}" if prev else "-"
        peak_mb = float(row["peak_factor_bytes"]) / 1e6
        print(f"{int(row['n']):>10}{best_ms:>12.2f}{ratio:>8}{peak_mb:>10.1f}")
        prev = best_ms
    return 0


if __name__ == "__main__":
    sys.exit(main())
