"""Shared builders for random and hand-made test grids."""

from __future__ import annotations

import math

import numpy as np
from gridcascade.generators import topology_grid
from gridcascade.grid import Grid, _make


def random_tree_edges(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    return [(int(rng.integers(k)), k) for k in range(1, n)]


def random_graph(
    rng: np.random.Generator,
    n: int,
    extra: int,
    *,
    multi: bool = False,
    connected: bool = True,
    reactance: str = "unit",
) -> Grid:
    """Random topology; spanning tree plus ``extra`` edges, optionally with parallel lines."""
    edges = random_tree_edges(rng, n) if connected else []
    present = set(edges)
    tries = 0
    while extra > 0 and tries < 50 * (extra + 1):
        tries += 1
        a, b = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
        if (a, b) in present and not multi:
            continue
        edges.append((a, b))
        present.add((a, b))
        extra -= 1
    g = topology_grid(n, edges)
    if reactance == "random":
        g = g.with_reactances(rng.uniform(0.2, 5.0, g.n_lines))
    return g


def balanced_powers(rng: np.random.Generator, g: Grid) -> np.ndarray:
    from gridcascade.grid import component_labels

    p = rng.standard_normal(g.n_buses)
    labels = component_labels(g)
    means = np.bincount(labels, weights=p) / np.bincount(labels)
    return p - means[labels]


def with_flows(rng: np.random.Generator, g: Grid) -> Grid:
    return g.with_powers(balanced_powers(rng, g))


def make_grid(powers, lines) -> Grid:
    """``lines`` as ``(u, v, x, c)`` tuples; ``c=None`` means unbounded."""
    u, v, x, c = zip(*lines)
    c = [math.inf if ci is None else ci for ci in c]
    return _make(powers, u, v, x, c, {})

