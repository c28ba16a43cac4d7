"""Mean yield of MVES-RB, random and exhaustive attacks on small grids.

    python scripts/attack_comparison.py --graphs 20 --kmax 2
"""

from __future__ import annotations

import argparse

import numpy as np

from gridcascade.errors import DisconnectedEnsembleError, TooLargeError
from gridcascade.generators import EnsembleSpec, assign_operating_point, generate
from gridcascade.vulnerability import brute_force_min_yield, run_attack


def graphs(count: int, n: int, max_lines: int, n_sd: int, fos: float):
    seed = 0
    while count:
        model = ("er", "ws", "ba")[count % 3]
        spec = {"er": EnsembleSpec("er", n, p=0.12, seed=seed),
                "ws": EnsembleSpec("ws", n, p=0.1, k=4, seed=seed),
                "ba": EnsembleSpec("ba", n, k=2, seed=seed)}[model]
        seed += 1
        try:
            g = generate(spec)
        except DisconnectedEnsembleError:
            continue
        if g.n_lines <= max_lines:
            count -= 1
            yield assign_operating_point(g, n_sd=n_sd, fos=fos, seed=seed)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graphs", type=int, default=20)
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--max-lines", type=int, default=60)
    ap.add_argument("--n-sd", type=int, default=5)
    ap.add_argument("--fos", type=float, default=1.1)
    ap.add_argument("--kmax", type=int, default=2)
    ap.add_argument("--draws", type=int, default=50, help="random attacks per graph and k")
    ap.add_argument("--cap", type=int, default=200_000)
    args = ap.parse_args()

    grids = list(graphs(args.graphs, args.n, args.max_lines, args.n_sd, args.fos))
    print(f"{'k':>3} {'brute':>8} {'mves_rb':>8} {'random':>8} {'mves<=rand':>11}")
    for k in range(1, args.kmax + 1):
        best, mves, rand = [], [], []
        for i, g in enumerate(grids):
            try:
                best.append(brute_force_min_yield(g, k, cap=args.cap).yield_)
            except TooLargeError:
                best.append(np.nan)
            mves.append(run_attack(g, "mves_rb", k).yield_)
            rand.append(np.mean([run_attack(g, "random", k, seed=(i, k, s)).yield_ for s in range(args.draws)]))
        wins = sum(a <= b for a, b in zip(mves, rand))
        print(f"{k:>3} {np.nanmean(best):>8.3f} {np.mean(mves):>8.3f} {np.mean(rand):>8.3f} {wins:>7}/{len(grids)}")


if __name__ == "__main__":
    main()
