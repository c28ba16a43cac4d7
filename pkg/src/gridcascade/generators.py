"""Synthetic grid ensembles, hand-built cascade fixtures and operating points."""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .dcflow import solve_flows
from .errors import DisconnectedEnsembleError, ParamRangeError, ValidationError
from .grid import Grid, _make, admittance_matrix, component_labels, shed_load
from .spectral import pseudo_inverse

MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class EnsembleSpec:
    """Random topology model.

    ``model`` is ``"er"`` (uses ``p``), ``"ws"`` (``k`` neighbours, rewiring
    ``p``) or ``"ba"`` (``k`` attachments per new node, seeded from a
    ``(k+1)``-clique).
    """

    model: str = "er"
    n: int = 1374
    p: float = 0.01
    k: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("er", "ws", "ba"):
            raise ValidationError("model", f"unknown ensemble {self.model!r}")
        if self.n < 2:
            raise ValidationError("n", "need at least two nodes")
        if self.model in ("er", "ws") and not 0 < self.p <= 1 and not (self.model == "ws" and self.p == 0):
            raise ValidationError("p", f"must lie in (0, 1], got {self.p}")
        if self.model in ("ws", "ba") and not 0 < self.k < self.n:
            raise ValidationError("k", f"must lie in 1..n-1, got {self.k}")

    @classmethod
    def reference_default(cls, model: str, n: int = 1374, seed: int = 0) -> "EnsembleSpec":
        return {
            "er": cls("er", n, p=0.01, seed=seed),
            "ws": cls("ws", n, p=0.1, k=4, seed=seed),
            "ba": cls("ba", n, k=3, seed=seed),
        }[model]


def _draw(spec: EnsembleSpec, seed: int) -> nx.Graph:
    if spec.model == "er":
        return nx.gnp_random_graph(spec.n, spec.p, seed=seed)
    if spec.model == "ws":
        return nx.watts_strogatz_graph(spec.n, spec.k, spec.p, seed=seed)
    return nx.barabasi_albert_graph(spec.n, spec.k, seed=seed, initial_graph=nx.complete_graph(spec.k + 1))


def topology_grid(n: int, edges, meta=None) -> Grid:
    """Unit-reactance, zero-injection, unbounded-capacity grid on the given edges."""
    edges = sorted((min(a, b), max(a, b)) for a, b in edges)
    u = [a for a, _ in edges]
    v = [b for _, b in edges]
    m = len(edges)
    return _make(np.zeros(n), u, v, np.ones(m), np.full(m, math.inf), meta or {})


def generate(spec: EnsembleSpec) -> Grid:
    """Connected sample from the ensemble; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    for attempt in range(MAX_ATTEMPTS):
        sub = int(rng.integers(2**31))
        graph = _draw(spec, sub)
        if nx.is_connected(graph):
            meta = {"model": spec.model, "n": spec.n, "p": spec.p, "k": spec.k, "seed": spec.seed, "attempt": attempt}
            return topology_grid(spec.n, graph.edges(), meta)
    raise DisconnectedEnsembleError(f"no connected {spec.model} sample after {MAX_ATTEMPTS} attempts")


def assign_operating_point(
    g: Grid,
    n_sd: int | None = None,
    mode: str = "pm1",
    fos: float = 1.1,
    seed=0,
) -> Grid:
    """Draw injections, solve flows and size capacities as ``fos * |f|``.

    ``mode="pm1"`` puts +1 on ``n_sd`` random buses and -1 on ``n_sd``
    others. ``mode="normal"`` draws i.i.d. standard normal injections and
    lets the highest-id bus absorb the residual. Zero-flow lines get
    ``fos`` times the mean absolute flow.
    """
    rng = np.random.default_rng(seed)
    n = g.n_buses
    if mode == "pm1":
        n_sd = max(1, n // 10) if n_sd is None else n_sd
        if not 1 <= 2 * n_sd <= n:
            raise ValidationError("n_sd", f"need 2 * n_sd <= {n}, got n_sd={n_sd}")
        picks = rng.choice(n, size=2 * n_sd, replace=False)
        powers = np.zeros(n)
        powers[picks[:n_sd]] = 1.0
        powers[picks[n_sd:]] = -1.0
    elif mode == "normal":
        powers = rng.standard_normal(n)
        powers[-1] = -powers[:-1].sum()
    else:
        raise ValidationError("mode", f"unknown power mode {mode!r}")

    powers = shed_load(powers, component_labels(g))
    g = g.with_powers(powers)
    p = pseudo_inverse(admittance_matrix(g))
    f = np.abs(solve_flows(g, p).flows)
    zero = f <= 1e-9 * max(float(f.max(initial=0.0)), 1e-300)
    floor = fos * float(f.mean()) if f.size else 1.0
    cap = np.where(zero, floor if floor > 0 else fos, fos * f)
    meta = dict(g.meta, power_mode=mode, n_sd=n_sd, fos=fos, op_seed=seed if np.isscalar(seed) else None)
    return _make(g.powers, g.u, g.v, g.reactance, cap, meta)


# fixtures ------------------------------------------------------------------


def _grid(powers, lines, meta) -> Grid:
    u, v, x, c = zip(*lines) if lines else ((), (), (), ())
    return _make(powers, u, v, x, c, meta)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParamRangeError(message)


def parallel_pair(x1: float = 1.0, x2: float = 3.0) -> Grid:
    """Two buses, +1/-1, joined by two lines of reactance ``x1`` and ``x2``."""
    _require(x1 > 0 and x2 > 0, "reactances must be positive")
    return _grid([1.0, -1.0], [(0, 1, x1, math.inf), (0, 1, x2, math.inf)], {"fixture": "obs51"})


def non_monotone_yield() -> Grid:
    """Four buses where one failure drives yield to 0 but adding a second keeps it at 1.

    Lines: 0 = {v1,v4}_1, 1 = {v1,v4}_2 (x=10), 2 = {v1,v2}, 3 = {v2,v3}, 4 = {v3,v4}.
    """
    lines = [
        (0, 3, 1.0, 30.0),
        (0, 3, 10.0, 30.0),
        (0, 1, 1.0, 20.0),
        (1, 2, 1.0, 20.0),
        (2, 3, 1.0, 20.0),
    ]
    return _grid([27.0, 5.0, 0.0, -32.0], lines, {"fixture": "obs61"})


def _bundle_capacities(m: int, eps: float) -> list[float]:
    return [1.0] + [m / (m - i) - eps for i in range(1, m)]


def long_cascade(m: int = 4, eps: float | None = None) -> Grid:
    """``m`` parallel unit lines; failing line 0 takes down one line per round."""
    _require(m >= 2, f"m must be >= 2, got {m}")
    eps = 1.0 / (2 * (m - 1)) if eps is None else eps
    _require(0 < eps <= 1.0 / (m - 1), f"need 0 < eps <= 1/(m-1) = {1.0 / (m - 1):.6g}, got {eps}")
    caps = _bundle_capacities(m, eps)
    lines = [(0, 1, 1.0, c) for c in caps]
    return _grid([float(m), -float(m)], lines, {"fixture": "obs62", "m": m, "eps": eps})


def distant_cascade(l: int = 3, d: int = 5, eps: float | None = None, mu: float | None = None) -> Grid:
    """Source and sink joined by one direct line (id 0) and ``l`` paths of ``d - 1`` lines.

    Path ``i`` has a weak middle line with capacity ``l/(l-i) - eps``; after
    the direct line fails the paths break one per round.
    """
    _require(l >= 2, f"l must be >= 2, got {l}")
    _require(d >= 5 and d % 2 == 1, f"d must be odd and >= 5, got {d}")
    eps = 1.0 / (2 * (l - 1)) if eps is None else eps
    _require(0 < eps < 1.0 / (l - 1), f"need 0 < eps < 1/(l-1) = {1.0 / (l - 1):.6g}, got {eps}")
    mu_max = (d - eps * d) / (eps * l)
    mu = min(1.0, mu_max / 2) if mu is None else mu
    _require(0 < mu < mu_max, f"need 0 < mu < (d - eps d)/(eps l) = {mu_max:.6g}, got {mu}")

    q = (d - 1) // 2
    per_path = d - 2
    s, t = 0, 1 + l * per_path

    def bus(i: int, j: int) -> int:
        return 1 + i * per_path + (j - 1)

    lines = [(s, t, mu, float(l))]
    for i in range(l):
        lines.append((s, bus(i, 1), 1.0, float(l)))
        for j in range(1, d - 2):
            cap = l / (l - i) - eps if j == q else float(l)
            lines.append((bus(i, j), bus(i, j + 1), 1.0, cap))
        lines.append((bus(i, d - 2), t, 1.0, float(l)))
    powers = np.zeros(t + 1)
    powers[s], powers[t] = l, -l
    return _grid(powers, lines, {"fixture": "obs63", "l": l, "d": d, "eps": eps, "mu": mu})


def distant_cascade_weak_lines(l: int, d: int) -> list[int]:
    """Line ids of the weak middle lines of :func:`distant_cascade`, path order."""
    q = (d - 1) // 2
    return [1 + i * (d - 1) + q for i in range(l)]


def _sensitive_bundle(m: int, eps: float, variant: str, mu: float | None) -> Grid:
    _require(m >= 3, f"m must be >= 3, got {m}")
    _require(0 < eps <= 1.0 / (m - 1), f"need 0 < eps <= 1/(m-1) = {1.0 / (m - 1):.6g}, got {eps}")
    caps = [1.0, m / (m - 1)] + [m / (m - i) - eps for i in range(2, m)]
    x = [1.0] * m
    if variant == "c_minus":
        caps[1] -= eps
    elif variant == "x_minus":
        _require(mu is not None and 0 < mu <= 1.0 / (m - 1), f"need 0 < mu <= 1/(m-1) = {1.0 / (m - 1):.6g}, got {mu}")
        x[1] = 1.0 - mu
    lines = [(0, 1, xi, c) for xi, c in zip(x, caps)]
    meta = {"fixture": f"obs64_{variant}", "m": m, "eps": eps}
    if mu is not None:
        meta["mu"] = mu
    return _grid([float(m), -float(m)], lines, meta)


def sensitive_bundle(m: int = 4, eps: float | None = None) -> Grid:
    eps = 1.0 / (2 * (m - 1)) if eps is None else eps
    return _sensitive_bundle(m, eps, "base", None)


def sensitive_bundle_c_minus(m: int = 4, eps: float | None = None) -> Grid:
    eps = 1.0 / (2 * (m - 1)) if eps is None else eps
    return _sensitive_bundle(m, eps, "c_minus", None)


def sensitive_bundle_x_minus(m: int = 4, eps: float | None = None, mu: float | None = None) -> Grid:
    eps = 1.0 / (2 * (m - 1)) if eps is None else eps
    mu = 1.0 / (2 * (m - 1)) if mu is None else mu
    return _sensitive_bundle(m, eps, "x_minus", mu)


FIXTURES = {
    "obs51": parallel_pair,
    "obs61": non_monotone_yield,
    "obs62": long_cascade,
    "obs63": distant_cascade,
    "obs64_base": sensitive_bundle,
    "obs64_c_minus": sensitive_bundle_c_minus,
    "obs64_x_minus": sensitive_bundle_x_minus,
}


def fixture(name: str, **params) -> Grid:
    """Build a named fixture; see :data:`FIXTURES` for the names."""
    try:
        build = FIXTURES[name]
    except KeyError:
        raise ValidationError("fixture", f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None
    try:
        return build(**params)
    except TypeError as exc:
        raise ParamRangeError(f"bad parameters for {name}: {exc}") from None
