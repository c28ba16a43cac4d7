"""Flow-change ratios after single line failures, binned by resistance distance.

Writes the per-pair CSV through ``gridcascade figdata`` and prints the
median |S| and M per bin of r(e, e'), which should fall as r grows.

    python scripts/single_failure.py --n 100 --out figdata
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from gridcascade.cli import main as cli


def summarize(path: Path, bins: int) -> None:
    with open(path, newline="") as fh:
        # S is blank where the pre-failure flow on e is zero
        rows = [x for x in csv.DictReader(fh) if x["S"] and x["M"]]
    r = np.array([float(x["r"]) for x in rows])
    s = np.abs([float(x["S"]) for x in rows])
    m = np.array([float(x["M"]) for x in rows])
    edges = np.quantile(r, np.linspace(0, 1, bins + 1))
    which = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, bins - 1)
    print(f"{'r_lo':>8} {'r_hi':>8} {'pairs':>7} {'med|S|':>9} {'medM':>9}")
    for b in range(bins):
        sel = which == b
        if sel.any():
            print(f"{edges[b]:>8.3f} {edges[b + 1]:>8.3f} {sel.sum():>7} {np.median(s[sel]):>9.4f} {np.median(m[sel]):>9.4f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ensemble", choices=["er", "ws", "ba"], default="er")
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bins", type=int, default=8)
    ap.add_argument("--out", type=Path, default=Path("figdata"))
    args = ap.parse_args()
    argv = ["figdata", "--ensemble", args.ensemble, "--n", str(args.n), "--trials", str(args.trials),
            "--k", "1", "--draws", "1", "--seed", str(args.seed), "--output", str(args.out)]
    if args.ensemble != "ba":
        argv += ["--p", str(args.p)]
    code = cli(argv)
    if code:
        raise SystemExit(code)
    summarize(args.out / "single_failure.csv", args.bins)


if __name__ == "__main__":
    main()
