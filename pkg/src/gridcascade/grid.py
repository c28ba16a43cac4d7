"""Grid model: buses, lines, admittance matrix, islands and load shedding.

A grid is an undirected multigraph. Per-line data (reactance, capacity, flow)
is always keyed by line id so that parallel lines stay distinguishable; only
the admittance matrix aggregates parallel lines per bus pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ImbalanceError, ValidationError

BALANCE_TOL = 1e-9
_SHED_BALANCED_RTOL = 1e-12


@dataclass(frozen=True)
class Bus:
    id: int
    power: float


@dataclass(frozen=True)
class Line:
    id: int
    u: int
    v: int
    reactance: float
    capacity: float

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable multigraph with injections, reactances and capacities.

    Line endpoints are stored with ``u < v``; a positive signed flow runs
    from ``u`` to ``v``.
    """

    powers: np.ndarray
    u: np.ndarray
    v: np.ndarray
    reactance: np.ndarray
    capacity: np.ndarray
    meta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def n_buses(self) -> int:
        return len(self.powers)

    @property
    def n_lines(self) -> int:
        return len(self.u)

    @property
    def buses(self) -> list[Bus]:
        return [Bus(i, float(p)) for i, p in enumerate(self.powers)]

    @property
    def lines(self) -> list[Line]:
        return [self.line(e) for e in range(self.n_lines)]

    def line(self, e: int) -> Line:
        if not 0 <= e < self.n_lines:
            raise ValidationError("line", f"unknown line id {e}")
        return Line(
            e,
            int(self.u[e]),
            int(self.v[e]),
            float(self.reactance[e]),
            float(self.capacity[e]),
        )

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-bus list of ``(neighbour, line id)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_buses)]
        for e, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist())):
            adj[a].append((b, e))
            adj[b].append((a, e))
        return adj

    def with_powers(self, powers: Sequence[float]) -> "Grid":
        return _make(powers, self.u, self.v, self.reactance, self.capacity, self.meta)

    def with_capacities(self, capacity: Sequence[float]) -> "Grid":
        return _make(self.powers, self.u, self.v, self.reactance, capacity, self.meta)

    def with_reactances(self, reactance: Sequence[float]) -> "Grid":
        return _make(self.powers, self.u, self.v, reactance, self.capacity, self.meta)

    def is_unit_reactance(self) -> bool:
        return bool(np.all(self.reactance == 1.0))

    def to_dict(self) -> dict[str, Any]:
        return {
            "buses": [{"id": i, "power": float(p)} for i, p in enumerate(self.powers)],
            "lines": [
                {
                    "id": e,
                    "u": int(self.u[e]),
                    "v": int(self.v[e]),
                    "reactance": float(self.reactance[e]),
                    # JSON has no infinity; an unbounded line is written as null
                    "capacity": None if math.isinf(self.capacity[e]) else float(self.capacity[e]),
                }
                for e in range(self.n_lines)
            ],
            "meta": dict(self.meta),
        }


def _make(powers, u, v, reactance, capacity, meta) -> Grid:
    powers = np.asarray(powers, dtype=float)
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    reactance = np.asarray(reactance, dtype=float)
    capacity = np.asarray(capacity, dtype=float)
    n = len(powers)
    if powers.ndim != 1:
        raise ValidationError("buses", "powers must be a flat vector")
    if not np.all(np.isfinite(powers)):
        raise ValidationError("buses.power", "non-finite power injection")
    if not (len(u) == len(v) == len(reactance) == len(capacity)):
        raise ValidationError("lines", "per-line arrays differ in length")
    for name, arr in (("lines.u", u), ("lines.v", v)):
        bad = np.flatnonzero((arr < 0) | (arr >= n))
        if bad.size:
            raise ValidationError(name, f"line {int(bad[0])} references missing bus {int(arr[bad[0]])}")
    loops = np.flatnonzero(u == v)
    if loops.size:
        raise ValidationError("lines", f"line {int(loops[0])} is a self-loop")
    bad = np.flatnonzero(~(reactance > 0) | ~np.isfinite(reactance))
    if bad.size:
        raise ValidationError("lines.reactance", f"line {int(bad[0])} has reactance {reactance[bad[0]]!r}, must be > 0")
    bad = np.flatnonzero(~(capacity > 0))
    if bad.size:
        raise ValidationError("lines.capacity", f"line {int(bad[0])} has capacity {capacity[bad[0]]!r}, must be > 0")
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    return Grid(_frozen(powers), _frozen(lo), _frozen(hi), _frozen(reactance), _frozen(capacity), dict(meta))


def build_grid(spec: Mapping[str, Any], *, shed: bool = False) -> Grid:
    """Validate an instance description and build a :class:`Grid`.

    ``spec`` follows the instance-file layout: ``buses: [{id, power}]`` and
    ``lines: [{id, u, v, reactance, capacity}]``. Ids must form contiguous
    ranges. A ``null`` capacity means unbounded. With ``shed=True`` any
    imbalanced component is shed proportionally instead of rejected.
    """
    try:
        buses = list(spec["buses"])
        lines = list(spec.get("lines", []))
    except (KeyError, TypeError) as exc:
        raise ValidationError("buses", "instance must contain a 'buses' list") from exc

    powers = np.zeros(len(buses))
    seen = set()
    for k, b in enumerate(buses):
        try:
            bid = int(b.get("id", k))
            p = float(b["power"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"buses[{k}]", "needs integer id and real power") from exc
        if not 0 <= bid < len(buses) or bid in seen:
            raise ValidationError(f"buses[{k}].id", f"ids must be a permutation of 0..{len(buses) - 1}, got {bid}")
        seen.add(bid)
        powers[bid] = p

    m = len(lines)
    u = np.zeros(m, dtype=np.int64)
    v = np.zeros(m, dtype=np.int64)
    x = np.zeros(m)
    c = np.zeros(m)
    seen = set()
    for k, ln in enumerate(lines):
        try:
            lid = int(ln.get("id", k))
            cap = ln.get("capacity")
            row = (int(ln["u"]), int(ln["v"]), float(ln["reactance"]), math.inf if cap is None else float(cap))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"lines[{k}]", "needs id, u, v, reactance, capacity") from exc
        if not 0 <= lid < m or lid in seen:
            raise ValidationError(f"lines[{k}].id", f"ids must be a permutation of 0..{m - 1}, got {lid}")
        seen.add(lid)
        u[lid], v[lid], x[lid], c[lid] = row

    g = _make(powers, u, v, x, c, spec.get("meta") or {})
    labels = component_labels(g)
    if shed:
        return g.with_powers(shed_load(g.powers, labels))
    check_balance(g.powers, labels)
    return g


def check_balance(powers: np.ndarray, labels: np.ndarray, tol: float = BALANCE_TOL) -> None:
    sums = np.bincount(labels, weights=powers)
    bad = np.flatnonzero(np.abs(sums) > tol)
    if bad.size:
        members = np.flatnonzero(labels == bad[0]).tolist()
        raise ImbalanceError(
            f"component containing buses {members[:8]}{'...' if len(members) > 8 else ''} "
            f"has net injection {sums[bad[0]]:.6g}"
        )


def load_instance(path: str | Path, *, shed: bool = False) -> Grid:
    with open(path) as fh:
        return build_grid(json.load(fh), shed=shed)


def save_instance(g: Grid, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh, indent=1)
        fh.write("\n")


def _removed_mask(g: Grid, removed: Iterable[int] | np.ndarray | None) -> np.ndarray:
    if removed is None:
        return np.zeros(g.n_lines, dtype=bool)
    if isinstance(removed, np.ndarray) and removed.dtype == bool:
        return removed
    mask = np.zeros(g.n_lines, dtype=bool)
    mask[np.fromiter(removed, dtype=np.int64)] = True
    return mask


def admittance_matrix(g: Grid, removed: Iterable[int] | np.ndarray | None = None) -> np.ndarray:
    """Dense admittance matrix of ``g`` with the ``removed`` lines taken out.

    Off-diagonal ``a_uv`` is minus the summed susceptance of all parallel
    lines between ``u`` and ``v``; each diagonal entry is minus its row's
    off-diagonal sum, so rows sum to zero exactly.
    """
    keep = ~_removed_mask(g, removed)
    n = g.n_buses
    u, v = g.u[keep], g.v[keep]
    y = 1.0 / g.reactance[keep]
    a = np.zeros((n, n))
    np.add.at(a, (u, v), -y)
    np.add.at(a, (v, u), -y)
    a[np.diag_indices(n)] = -a.sum(axis=1)
    return a


def component_labels(g: Grid, removed: Iterable[int] | np.ndarray | None = None) -> np.ndarray:
    """Component label per bus; labels are numbered by each component's lowest bus id."""
    keep = ~_removed_mask(g, removed)
    n = g.n_buses
    graph = sp.coo_matrix((np.ones(int(keep.sum())), (g.u[keep], g.v[keep])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    return canonical_labels(raw)


def canonical_labels(raw: np.ndarray) -> np.ndarray:
    """Relabel so that components are numbered in order of their lowest member."""
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    remap = np.empty(len(order), dtype=np.int64)
    remap[order] = np.arange(len(order))
    uniq = np.unique(raw)
    return remap[np.searchsorted(uniq, raw)]


def labels_to_partition(labels: np.ndarray) -> list[list[int]]:
    labels = canonical_labels(np.asarray(labels))
    parts: list[list[int]] = [[] for _ in range(int(labels.max()) + 1 if len(labels) else 0)]
    for bus, lab in enumerate(labels.tolist()):
        parts[lab].append(bus)
    return parts


def partition_to_labels(partition: Sequence[Sequence[int]], n: int) -> np.ndarray:
    labels = np.full(n, -1, dtype=np.int64)
    for k, comp in enumerate(partition):
        labels[np.asarray(comp, dtype=np.int64)] = k
    if np.any(labels < 0):
        raise ValidationError("partition", "does not cover every bus")
    return labels


def components(g: Grid, removed: Iterable[int] | np.ndarray | None = None) -> list[list[int]]:
    """Connected components of the grid without ``removed``, lowest bus first."""
    return labels_to_partition(component_labels(g, removed))


def shed_load(powers: Sequence[float], partition) -> np.ndarray:
    """Balance every component by proportional scaling.

    The heavier side of each component is scaled by the common factor
    ``lighter / heavier``; a component lacking either supply or demand is
    zeroed. ``partition`` is a list of bus lists or a per-bus label array.
    """
    powers = np.asarray(powers, dtype=float)
    if len(partition) and not np.isscalar(partition[0]):
        labels = partition_to_labels(partition, len(powers))
    else:
        labels = np.asarray(partition, dtype=np.int64)
    supply = np.bincount(labels, weights=np.clip(powers, 0.0, None))
    demand = np.bincount(labels, weights=np.clip(-powers, 0.0, None))

    supply_factor = np.ones_like(supply)
    demand_factor = np.ones_like(demand)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        over_supply = supply > demand * (1 + _SHED_BALANCED_RTOL)
        over_demand = demand > supply * (1 + _SHED_BALANCED_RTOL)
        supply_factor = np.where(over_supply, demand / supply, 1.0)
        demand_factor = np.where(over_demand, supply / demand, 1.0)
    dead = (supply == 0) | (demand == 0)
    supply_factor[dead] = 0.0
    demand_factor[dead] = 0.0

    out = np.where(powers > 0, powers * supply_factor[labels], powers * demand_factor[labels])
    out[powers == 0] = 0.0
    return out


def bridges(g: Grid, removed: Iterable[int] | np.ndarray | None = None) -> set[int]:
    """Line ids of all cut-edges, by iterative Tarjan low-link DFS.

    Parallel lines are never bridges; the DFS skips only the tree edge's own
    id when looking back, not every line to the parent.
    """
    keep = ~_removed_mask(g, removed)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(g.n_buses)]
    for e in np.flatnonzero(keep).tolist():
        a, b = int(g.u[e]), int(g.v[e])
        adj[a].append((b, e))
        adj[b].append((a, e))

    disc = [-1] * g.n_buses
    low = [0] * g.n_buses
    out: set[int] = set()
    timer = 0
    for root in range(g.n_buses):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            node, via, it = stack[-1]
            advanced = False
            for nxt, e in it:
                if e == via:
                    continue
                if disc[nxt] < 0:
                    disc[nxt] = low[nxt] = timer
                    timer += 1
                    stack.append((nxt, e, iter(adj[nxt])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nxt])
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    out.add(via)
    return out


def hop_distances(g: Grid) -> np.ndarray:
    """All-pairs hop counts in the full topology; ``inf`` across components."""
    from scipy.sparse.csgraph import shortest_path

    n = g.n_buses
    graph = sp.coo_matrix((np.ones(g.n_lines), (g.u, g.v)), shape=(n, n)).tocsr()
    return shortest_path(graph, directed=False, unweighted=True)
