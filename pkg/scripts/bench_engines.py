"""Time the from-scratch engine against the rank-1 engine on long cascades.

Scans seeded ER(n, p) operating points for cascades of at least
``--min-rounds`` rounds and prints one row per workload plus the medians.

    python scripts/bench_engines.py --n 200 --count 10
"""

from __future__ import annotations

import argparse
import logging
import statistics

from gridcascade.cli import long_cascade_workloads, time_engines

log = logging.getLogger("bench_engines")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--fos", type=float, default=1.05)
    ap.add_argument("--n-sd", type=int, default=50)
    ap.add_argument("--min-rounds", type=int, default=10)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    workloads = long_cascade_workloads(args.n, args.p, args.fos, args.n_sd, args.min_rounds, args.count)
    print(f"{'seed':>5} {'F0':>6} {'t':>4} {'cfe_ms':>9} {'pb_ms':>9} {'speedup':>8}")
    cfe, pb = [], []
    for seed, g, f0, _ in workloads:
        a, b, t = time_engines(g, f0, repeats=args.repeats)
        cfe.append(a)
        pb.append(b)
        print(f"{seed:>5} {f0[0]:>6} {t:>4} {a * 1e3:>9.2f} {b * 1e3:>9.2f} {a / b:>8.2f}")
    if not workloads:
        log.warning("no workload reached %d rounds", args.min_rounds)
        return
    print(f"median cfe={statistics.median(cfe) * 1e3:.2f}ms pb={statistics.median(pb) * 1e3:.2f}ms "
          f"ratio pb/cfe={statistics.median(pb) / statistics.median(cfe):.3f}")


if __name__ == "__main__":
    main()
