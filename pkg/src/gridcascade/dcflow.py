"""DC power flow and single-failure flow redistribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutEdgeError, ImbalanceError, ValidationError
from .grid import BALANCE_TOL, Grid
from .spectral import PseudoInverse, cut_expression, cut_tolerance, edge_resistance_distance, resistance_distance

LOW_FLOW_FRACTION = 0.01


@dataclass(frozen=True, eq=False)
class FlowState:
    """Solved network state.

    ``flows`` are signed, positive from the lower-id endpoint to the higher
    one, and ``nan`` on removed lines. ``angles`` carry an arbitrary offset
    per component.
    """

    angles: np.ndarray
    flows: np.ndarray
    powers: np.ndarray
    version: int = 0

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.flows)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.flows)

    def overloaded(self, capacity: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        """Ids of present lines whose |flow| exceeds capacity by more than the guard."""
        guard = rtol * np.maximum(1.0, capacity)
        with np.errstate(invalid="ignore"):
            over = np.abs(self.flows) > capacity + guard
        return np.flatnonzero(over & self.present)


def _removed_mask(g: Grid, p: PseudoInverse) -> np.ndarray:
    mask = np.zeros(g.n_lines, dtype=bool)
    if p.removed:
        mask[list(p.removed)] = True
    return mask


def line_flows(g: Grid, angles: np.ndarray, removed: np.ndarray) -> np.ndarray:
    flows = (angles[g.u] - angles[g.v]) / g.reactance
    flows[removed] = np.nan
    return flows


def solve_flows(g: Grid, p: PseudoInverse, powers: np.ndarray | None = None) -> FlowState:
    """Phase angles ``A+ P`` and the induced line flows.

    ``powers`` must already be balanced on every component of the graph
    ``p`` describes (defaults to the grid's own injections).
    """
    powers = g.powers if powers is None else np.asarray(powers, dtype=float)
    sums = np.bincount(p.labels, weights=powers, minlength=p.n_components())
    tol = BALANCE_TOL * max(1.0, float(np.max(np.abs(powers), initial=0.0)))
    bad = np.flatnonzero(np.abs(sums) > tol)
    if bad.size:
        raise ImbalanceError(f"component {int(bad[0])} has net injection {sums[bad[0]]:.6g}; shed load first")
    angles = p.matrix @ powers
    return FlowState(angles, line_flows(g, angles, _removed_mask(g, p)), powers, p.graph_version)


def _require_present(p: PseudoInverse, e: int) -> None:
    if e in p.removed:
        raise ValidationError("line", f"line {e} is not in the current graph")


def flow_change_single_failure(g: Grid, p: PseudoInverse, state: FlowState, failed: int) -> np.ndarray:
    """Flow change on every surviving line when one non-cut line fails.

    Rank-1 form: the angle update is ``A+ X (X^T theta) / denom`` with
    ``X = e_p - e_q``. Entries for removed lines and for ``failed`` itself
    are ``nan``.
    """
    _require_present(p, failed)
    ln = g.line(failed)
    denom = cut_expression(p.matrix, ln.u, ln.v, ln.reactance)
    if abs(denom) <= cut_tolerance(ln.reactance):
        raise CutEdgeError(f"line {failed} is a cut-edge")
    w = p.matrix[:, ln.u] - p.matrix[:, ln.v]
    delta = -(ln.reactance / g.reactance) * (w[g.u] - w[g.v]) / denom * state.flows[failed]
    delta[~state.present] = np.nan
    delta[failed] = np.nan
    return delta


def flow_change_resistance_form(g: Grid, p: PseudoInverse, state: FlowState, failed: int) -> np.ndarray:
    """Same flow change, written through resistance distances only.

    ``df_ij = (x_pq / x_ij) * (-r(i,p) + r(i,q) + r(j,p) - r(j,q)) / 2 / (x_pq - r(p,q)) * f_pq``;
    with unit reactances this is the familiar ``... / (1 - r(p,q))`` form.
    """
    _require_present(p, failed)
    ln = g.line(failed)
    a, b = ln.u, ln.v
    r_ab = resistance_distance(p, a, b)
    if abs(ln.reactance - r_ab) <= cut_tolerance(ln.reactance):
        raise CutEdgeError(f"line {failed} is a cut-edge")
    m = p.matrix
    d = np.diag(m)
    r_a = d + m[a, a] - 2.0 * m[:, a]
    r_b = d + m[b, b] - 2.0 * m[:, b]
    num = 0.5 * (-r_a[g.u] + r_b[g.u] + r_a[g.v] - r_b[g.v])
    delta = (ln.reactance / g.reactance) * num / (ln.reactance - r_ab) * state.flows[failed]
    # lines in other components see no change (their r values are meaningless)
    delta[p.labels[g.u] != p.labels[a]] = 0.0
    delta[~state.present] = np.nan
    delta[failed] = np.nan
    return delta


@dataclass(frozen=True, eq=False)
class ChangeRatios:
    """Per-line edge flow change ratio ``S`` and mutual ratio ``M``; ``nan`` = undefined."""

    failed: int
    S: np.ndarray
    M: np.ndarray


def change_ratios(state: FlowState, deltas: np.ndarray, failed: int) -> ChangeRatios:
    """``S = |df_e / f_e|`` and ``M = |df_e / f_failed|``.

    ``S`` is left undefined on lines carrying less than 1% of the mean
    absolute flow; ``M`` is undefined everywhere if the failed line carried
    no flow.
    """
    f = state.flows
    mags = np.abs(f[state.present])
    floor = LOW_FLOW_FRACTION * float(mags.mean()) if mags.size else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.abs(deltas / f)
        s[~(np.abs(f) >= floor) | (f == 0)] = np.nan
        f_failed = f[failed]
        m = np.abs(deltas / f_failed) if f_failed != 0 else np.full_like(deltas, np.nan)
    s[np.isnan(deltas)] = np.nan
    m[np.isnan(deltas)] = np.nan
    return ChangeRatios(failed, s, m)


def flow_change_bounds(g: Grid, p: PseudoInverse, failed: int, target: int) -> tuple[float, float]:
    """Upper bounds on ``M_{target,failed}`` for unit-reactance grids.

    Returns ``(r(p,q) / (1 - r(p,q)), r(e,e') / (1 - r(p,q)))``.
    """
    if not g.is_unit_reactance():
        raise ValidationError("reactance", "flow change bounds hold only when every reactance is 1")
    _require_present(p, failed)
    fl, tg = g.line(failed), g.line(target)
    r_pq = resistance_distance(p, fl.u, fl.v)
    if abs(1.0 - r_pq) <= cut_tolerance(1.0):
        raise CutEdgeError(f"line {failed} is a cut-edge")
    denom = 1.0 - r_pq
    return r_pq / denom, edge_resistance_distance(p, tg, fl) / denom
