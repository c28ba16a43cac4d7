"""Initial-failure selection for the minimum yield problem."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cascade import CascadeTrace, run_cfe_pb
from .dcflow import solve_flows
from .errors import TooLargeError, ValidationError
from .grid import Grid, admittance_matrix, shed_load
from .metrics import yield_of
from .spectral import pseudo_inverse

DEFAULT_CAP = 100_000


@dataclass
class AttackResult:
    chosen: tuple[int, ...]
    trace: CascadeTrace
    yield_: float
    method: str


def _check_k(g: Grid, k: int) -> None:
    if not 1 <= k <= g.n_lines:
        raise ValidationError("k", f"must lie in 1..{g.n_lines}, got {k}")


def mves_scores(g: Grid) -> np.ndarray:
    """``|f_e| * r(e)`` per line on the intact grid."""
    p = pseudo_inverse(admittance_matrix(g))
    state = solve_flows(g, p, shed_load(g.powers, p.labels))
    m = p.matrix
    r = m[g.u, g.u] + m[g.v, g.v] - 2.0 * m[g.u, g.v]
    return np.abs(state.flows) * r


def mves_rb(g: Grid, k: int) -> list[int]:
    """The ``k`` lines with largest ``|f_e| r(e)``; ties go to the lower id."""
    _check_k(g, k)
    scores = mves_scores(g)
    order = np.lexsort((np.arange(g.n_lines), -scores))
    return order[:k].tolist()


def random_attack(g: Grid, k: int, seed) -> tuple[int, ...]:
    """Uniform k-subset of lines, reproducible from ``seed``."""
    _check_k(g, k)
    rng = np.random.default_rng(seed)
    return tuple(sorted(rng.choice(g.n_lines, size=k, replace=False).tolist()))


def evaluate_attack(g: Grid, f0, method: str = "given") -> AttackResult:
    chosen = tuple(sorted(int(e) for e in f0))
    trace = run_cfe_pb(g, chosen)
    return AttackResult(chosen, trace, yield_of(g, trace), method)


def _yield_of_subset(args) -> tuple[float, tuple[int, ...]]:
    g, subset = args
    trace = run_cfe_pb(g, subset, check_initial=False)
    return yield_of(g, trace), subset


def n_subsets(m: int, k: int) -> int:
    return sum(math.comb(m, s) for s in range(1, k + 1))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GRIDCASCADE_THREADS", "1")))
    except ValueError:
        return 1


def brute_force_min_yield(g: Grid, k: int, cap: int = DEFAULT_CAP, workers: int | None = None) -> AttackResult:
    """Exhaustive minimum-yield search over every subset of size 1..k.

    Smaller sets are searched too because yield is not monotone in the
    failure set. Ties resolve to the lexicographically smallest id tuple.
    """
    _check_k(g, k)
    total = n_subsets(g.n_lines, k)
    if total > cap:
        raise TooLargeError(f"{total} subsets exceed the cap of {cap}")
    subsets = itertools.chain.from_iterable(itertools.combinations(range(g.n_lines), s) for s in range(1, k + 1))
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_yield_of_subset, ((g, s) for s in subsets), chunksize=64))
    else:
        results = [_yield_of_subset((g, s)) for s in subsets]
    _, best = min(results)
    return evaluate_attack(g, best, "brute_force")


def run_attack(g: Grid, method: str, k: int, seed=0, cap: int = DEFAULT_CAP) -> AttackResult:
    if method == "mves_rb":
        return evaluate_attack(g, mves_rb(g, k), "mves_rb")
    if method == "random":
        return evaluate_attack(g, random_attack(g, k, seed), "random")
    if method == "brute_force":
        return brute_force_min_yield(g, k, cap)
    raise ValidationError("method", f"unknown attack method {method!r}")
