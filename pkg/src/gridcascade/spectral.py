"""Pseudo-inverse of the admittance matrix and the queries it answers.

All operations take the dense symmetric pseudo-inverse ``A+`` of the
admittance matrix. Removing a non-cut line is a rank-1 downdate in
O(|V|^2); removing a cut-line leaves ``A+`` untouched and only splits the
component labels, since balanced injections put zero flow on a bridge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger as _dger
from scipy.sparse.csgraph import connected_components

from .errors import CutEdgeError, GroupingError, NumericalError, StaleVersionError
from .grid import Line, canonical_labels

logger = logging.getLogger(__name__)

CUT_RTOL = 1e-7
GROUP_RTOL = 1e-7


def cut_tolerance(reactance: float) -> float:
    return CUT_RTOL * max(1.0, abs(reactance))


@dataclass(frozen=True, eq=False)
class PseudoInverse:
    """Moore-Penrose pseudo-inverse tied to a specific removed-line set.

    ``labels`` are the connected components of the graph the matrix
    currently describes (after cut-line removals), ``removed`` is the set of
    line ids logically taken out, and ``graph_version`` counts removals.
    """

    matrix: np.ndarray
    rank_cutoff: float
    labels: np.ndarray
    removed: frozenset[int] = frozenset()
    graph_version: int = 0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def n_components(self) -> int:
        return int(self.labels.max()) + 1 if self.n else 0


def _labels_from_matrix(a: np.ndarray) -> np.ndarray:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    _, raw = connected_components(sp.csr_matrix(off != 0), directed=False)
    return canonical_labels(raw)


def pseudo_inverse(a: np.ndarray, labels: np.ndarray | None = None) -> PseudoInverse:
    """Eigendecomposition-based pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues at or below ``n * eps * lambda_max`` are treated as zero.
    ``labels`` may pass in already-known component labels of the graph.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    try:
        lam, vec = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    lam_max = float(np.max(np.abs(lam))) if n else 0.0
    cutoff = n * np.finfo(float).eps * lam_max
    keep = lam > cutoff
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    m = (vec * inv) @ vec.T
    m = 0.5 * (m + m.T)
    return PseudoInverse(m, cutoff, _labels_from_matrix(a) if labels is None else np.asarray(labels))


def penrose_residuals(a: np.ndarray, ap: np.ndarray) -> tuple[float, float, float, float]:
    """Max-abs residuals of the four Penrose conditions."""
    a_ap = a @ ap
    ap_a = ap @ a
    return (
        float(np.max(np.abs(a_ap @ a - a), initial=0.0)),
        float(np.max(np.abs(ap @ a_ap - ap), initial=0.0)),
        float(np.max(np.abs(a_ap.T - a_ap), initial=0.0)),
        float(np.max(np.abs(ap_a.T - ap_a), initial=0.0)),
    )


def averaging_projector(labels: np.ndarray) -> np.ndarray:
    """``I - J`` where ``J`` averages within each component."""
    n = len(labels)
    same = labels[:, None] == labels[None, :]
    sizes = np.bincount(labels)[labels]
    return np.eye(n) - same / sizes[:, None]


def cut_expression(m: np.ndarray, i: int, j: int, reactance: float) -> float:
    """``1/a_e - 2 a+_ij + a+_ii + a+_jj`` for a single line with ``a_e = -1/x``."""
    return float(m[i, i] + m[j, j] - 2.0 * m[i, j] - reactance)


def _check_present(p: PseudoInverse, line: Line, version: int | None) -> None:
    if version is not None and version != p.graph_version:
        raise StaleVersionError(f"expected graph version {version}, pseudo-inverse is at {p.graph_version}")
    if line.id in p.removed:
        raise StaleVersionError(f"line {line.id} was already removed at version {p.graph_version}")


def is_cut_edge(p: PseudoInverse, line: Line) -> bool:
    """O(1) cut-edge test for a line present in the graph ``p`` describes."""
    expr = cut_expression(p.matrix, line.u, line.v, line.reactance)
    return abs(expr) <= cut_tolerance(line.reactance)


def rank1_downdate_inplace(m: np.ndarray, i: int, j: int, denom: float) -> None:
    """``m -= w w^T / denom`` with ``w = m[:, i] - m[:, j]``; single-threaded hot path.

    ``m`` must be a C- or F-contiguous float64 array; symmetric, so either
    layout is handed to BLAS ``dger`` as its transpose-free Fortran view.
    """
    w = m[:, i] - m[:, j]
    view = m.T if m.flags.c_contiguous else m
    out = _dger(-1.0 / denom, w, w, a=view, overwrite_a=True)
    if out is not view:
        view[...] = out


def rank1_remove(p: PseudoInverse, line: Line, version: int | None = None) -> PseudoInverse:
    """Pseudo-inverse after removing one non-cut line.

    Uses the single line's admittance ``-1/x`` rather than the aggregated
    bus-pair admittance, so removing one of several parallel lines is exact.
    """
    _check_present(p, line, version)
    denom = cut_expression(p.matrix, line.u, line.v, line.reactance)
    if abs(denom) <= cut_tolerance(line.reactance):
        raise CutEdgeError(f"line {line.id} is a cut-edge (denominator {denom:.3g})")
    m = p.matrix.copy()
    rank1_downdate_inplace(m, line.u, line.v, denom)
    return replace(p, matrix=m, removed=p.removed | {line.id}, graph_version=p.graph_version + 1)


def split_sides(m: np.ndarray, i: int, j: int, buses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two-cluster split of ``buses`` by the values of row ``i`` minus row ``j``."""
    vec = m[i, buses] - m[j, buses]
    vi = float(m[i, i] - m[j, i])
    vj = float(m[i, j] - m[j, j])
    spread = float(vec.max() - vec.min()) if len(vec) else 0.0
    if spread <= 0.0 or abs(vi - vj) < 0.5 * spread:
        raise GroupingError(f"row difference for ({i}, {j}) does not separate the endpoints")
    tol = GROUP_RTOL * spread
    near_i = np.abs(vec - vi) <= tol
    near_j = np.abs(vec - vj) <= tol
    if np.any(near_i == near_j):
        raise GroupingError(f"row difference for ({i}, {j}) has values outside the two endpoint clusters")
    return buses[near_i], buses[near_j]


def components_from_pinv(
    p: PseudoInverse, cut_line: Line, buses: np.ndarray | None = None
) -> tuple[list[int], list[int]]:
    """Split the component of a cut line into its two sides, ``u``'s side first.

    ``buses`` restricts the split to a bus set (default: the component
    containing the line); other components carry zero row differences and
    would form a third cluster.
    """
    if buses is None:
        buses = np.flatnonzero(p.labels == p.labels[cut_line.u])
    side_i, side_j = split_sides(p.matrix, cut_line.u, cut_line.v, np.asarray(buses))
    return sorted(side_i.tolist()), sorted(side_j.tolist())


def mark_cut_removed(p: PseudoInverse, line: Line, version: int | None = None) -> PseudoInverse:
    """Record removal of a cut line: matrix unchanged, component labels split."""
    _check_present(p, line, version)
    if not is_cut_edge(p, line):
        raise CutEdgeError(f"line {line.id} is not a cut-edge; use rank1_remove")
    _, side_j = components_from_pinv(p, line)
    labels = p.labels.copy()
    labels[side_j] = labels.max() + 1
    return replace(
        p,
        labels=canonical_labels(labels),
        removed=p.removed | {line.id},
        graph_version=p.graph_version + 1,
    )


def remove_line(p: PseudoInverse, line: Line, version: int | None = None) -> PseudoInverse:
    """Remove a line by whichever path applies."""
    if is_cut_edge(p, line):
        return mark_cut_removed(p, line, version)
    return rank1_remove(p, line, version)


def resistance_distance(p: PseudoInverse, i: int, j: int) -> float:
    """Effective resistance between buses; ``inf`` across components."""
    if p.labels[i] != p.labels[j]:
        return float("inf")
    m = p.matrix
    return float(m[i, i] + m[j, j] - 2.0 * m[i, j])


def resistance_matrix(p: PseudoInverse) -> np.ndarray:
    """All-pairs resistance distances; ``inf`` across components."""
    d = np.diag(p.matrix)
    r = d[:, None] + d[None, :] - 2.0 * p.matrix
    r[p.labels[:, None] != p.labels[None, :]] = np.inf
    np.fill_diagonal(r, 0.0)
    return r


def edge_resistance_distance(p: PseudoInverse, e: Line, f: Line) -> float:
    """Minimum resistance distance over the four endpoint pairs."""
    return min(resistance_distance(p, a, b) for a in e.endpoints for b in f.endpoints)


def kirchhoff_components(p: PseudoInverse) -> dict[int, float]:
    """Kirchhoff index of every component, computed two ways and cross-checked."""
    out = {}
    r = resistance_matrix(p)
    for lab in range(p.n_components()):
        idx = np.flatnonzero(p.labels == lab)
        half_sum = 0.5 * float(r[np.ix_(idx, idx)].sum())
        block = p.matrix[np.ix_(idx, idx)]
        # the trace identity needs a centred block; a matrix kept stale across
        # cut-line removals is centred only on the pre-split component
        centred = np.abs(block.sum(axis=1)).max() <= 1e-9 * max(1.0, np.abs(block).max())
        trace_form = len(idx) * float(np.trace(block))
        if centred and abs(half_sum - trace_form) > 1e-6 * max(1.0, abs(half_sum)):
            raise NumericalError(f"Kirchhoff index mismatch on component {lab}: {half_sum} vs {trace_form}")
        out[lab] = half_sum
    return out


def kirchhoff_index(p: PseudoInverse) -> float:
    """Half the sum of all pairwise resistance distances.

    For a disconnected graph the per-component indices are summed and a
    warning is logged; use :func:`kirchhoff_components` to get them apart.
    """
    per = kirchhoff_components(p)
    if len(per) > 1:
        logger.warning("Kirchhoff index of a graph with %d components is a per-component sum", len(per))
    return float(sum(per.values()))
