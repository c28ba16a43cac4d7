"""Severity metrics for completed cascades and hop distances between lines."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cascade import CascadeTrace
from .grid import Grid, hop_distances


@dataclass(frozen=True)
class CascadeMetrics:
    yield_: float
    failures: int
    rounds: int
    min_consecutive_distance: float
    per_round_distances: list[float] = field(default_factory=list)

    def as_row(self) -> dict[str, float]:
        row = asdict(self)
        row["yield"] = row.pop("yield_")
        row["per_round_distances"] = ";".join(_fmt(d) for d in self.per_round_distances)
        return row


def _fmt(d: float) -> str:
    return "inf" if math.isinf(d) else str(int(d))


def total_demand(powers: np.ndarray) -> float:
    return float(-np.asarray(powers)[np.asarray(powers) < 0].sum())


def yield_of(g: Grid, trace: CascadeTrace) -> float:
    """Demand served at stabilization over the original demand (1 if there was none)."""
    original = total_demand(g.powers)
    if original == 0:
        return 1.0
    served = -np.asarray(trace.final_powers)[g.powers < 0].sum()
    return float(min(1.0, max(0.0, served / original)))


class HopMetric:
    """Cached all-pairs hop counts on the original topology."""

    def __init__(self, g: Grid):
        self.g = g
        self.dist = hop_distances(g)

    def edge_distance(self, e: int, f: int) -> float:
        g = self.g
        a = (g.u[e], g.v[e])
        b = (g.u[f], g.v[f])
        return float(min(self.dist[x, y] for x in a for y in b))

    def set_distance(self, es, fs) -> float:
        return min((self.edge_distance(e, f) for e in es for f in fs), default=math.inf)


def edge_distance(g: Grid, e: int, f: int) -> float:
    """Hop distance between two lines: min over endpoint pairs; 0 if they touch."""
    return HopMetric(g).edge_distance(e, f)


def cascade_metrics(g: Grid, trace: CascadeTrace, hops: HopMetric | None = None) -> CascadeMetrics:
    """Yield, failure count, round count and the minimum consecutive-round distance.

    The distance metric is 0 for a cascade that stops after the initial event.
    """
    hops = hops or HopMetric(g)
    per_round = [hops.set_distance(trace.rounds[i - 1], trace.rounds[i]) for i in range(1, len(trace.rounds))]
    return CascadeMetrics(
        yield_=yield_of(g, trace),
        failures=len(trace.all_failed),
        rounds=trace.t,
        min_consecutive_distance=min(per_round) if per_round else 0.0,
        per_round_distances=per_round,
    )
