"""Command-line front end: ``gridcascade <command> [options]``.

Commands: solve, cascade, attack, generate, bench, figdata, metrics.
Exit codes: 0 success, 2 input error, 3 numerical error, 4 cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import errors
from .cascade import ENGINES, CascadeTrace, overloaded_lines, run_cfe, run_cfe_pb
from .dcflow import change_ratios, flow_change_single_failure, solve_flows
from .generators import FIXTURES, EnsembleSpec, assign_operating_point, fixture, generate
from .grid import Grid, admittance_matrix, bridges, component_labels, load_instance, shed_load
from .metrics import HopMetric, cascade_metrics
from .spectral import edge_resistance_distance, pseudo_inverse, resistance_matrix
from .vulnerability import DEFAULT_CAP, brute_force_min_yield, mves_rb, random_attack, run_attack, evaluate_attack

logger = logging.getLogger("gridcascade")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_CAP = 0, 2, 3, 4


@dataclass
class RunConfig:
    command: str
    input: Path | None = None
    output: Path | None = None
    seed: int = 0
    engine: str = "cfe-pb"
    f0: list[int] = field(default_factory=list)
    k: int = 1
    fos: float = 1.1
    shed: bool = False
    ensemble: str = "er"
    n: list[int] = field(default_factory=lambda: [100])
    p: float | None = None
    knn: int | None = None
    trials: int = 5
    cap: int = DEFAULT_CAP
    timestamp: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    def ensemble_spec(self, n: int, seed: int) -> EnsembleSpec:
        base = EnsembleSpec.reference_default(self.ensemble, n, seed)
        return EnsembleSpec(
            base.model,
            n,
            p=self.p if self.p is not None else base.p,
            k=self.knn if self.knn is not None else base.k,
            seed=seed,
        )


def _id_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated line ids, got {text!r}") from None


def _num_list(cast):
    def parse(text: str):
        try:
            return [cast(t) for t in text.split(",") if t]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcascade", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_input=True):
        p.add_argument("--input", type=Path, required=need_input, help="instance JSON file")
        p.add_argument("--output", type=Path, help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
        p.add_argument("--no-timestamp", dest="timestamp", action="store_false", help="omit run timestamp")

    def ensemble(p):
        p.add_argument("--ensemble", choices=["er", "ws", "ba"], default="er")
        p.add_argument("--n", type=_num_list(int), default=[100], help="node count(s), comma-separated (default 100)")
        p.add_argument("--p", type=float, help="ER edge / WS rewiring probability (defaults 0.01 / 0.1)")
        p.add_argument("--knn", type=int, help="WS neighbours / BA attachments (defaults 4 / 3)")

    p = sub.add_parser("solve", help="solve DC flows for an instance")
    common(p)
    p.add_argument("--shed", action="store_true", help="shed imbalanced components instead of failing")

    p = sub.add_parser("cascade", help="run a cascade from an initial failure set")
    common(p)
    p.add_argument("--engine", choices=sorted(ENGINES), default="cfe-pb")
    p.add_argument("--f0", type=_id_list, required=True, help="initial failed line ids, e.g. 0,3")
    p.add_argument("--shed", action="store_true")

    p = sub.add_parser("attack", help="choose an initial failure set and evaluate it")
    common(p)
    p.add_argument("--method", choices=["mves_rb", "random", "brute_force"], default="mves_rb")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help=f"brute-force subset cap (default {DEFAULT_CAP})")
    p.add_argument("--trace", type=Path, help="where to write the resulting trace JSON")
    p.add_argument("--shed", action="store_true")

    p = sub.add_parser("generate", help="write an ensemble sample or a named fixture")
    common(p, need_input=False)
    ensemble(p)
    p.add_argument("--fixture", choices=sorted(FIXTURES), help="build a named fixture instead of an ensemble")
    p.add_argument("--param", action="append", default=[], help="fixture parameter key=value (repeatable)")
    p.add_argument("--power-mode", choices=["pm1", "normal", "none"], default="pm1")
    p.add_argument("--n-sd", type=int, help="supply (= demand) bus count in pm1 mode (default n/10)")
    p.add_argument("--fos", type=float, default=1.1, help="capacity factor of safety (default 1.1)")

    p = sub.add_parser("bench", help="time CFE against CFE-PB on seeded workloads")
    common(p, need_input=False)
    ensemble(p)
    p.add_argument("--fos", type=_num_list(float), default=[1.05], help="FoS level(s) (default 1.05)")
    p.add_argument("--trials", type=int, default=5, help="workloads per cell, >= 3 (default 5)")
    p.add_argument("--k", type=int, default=1, help="initial failures per workload (default 1)")
    p.add_argument("--n-sd", type=int)

    p = sub.add_parser("figdata", help="emit CSV data behind the single-failure and attack figures")
    common(p, need_input=False)
    ensemble(p)
    p.add_argument("--trials", type=int, default=40, help="random single failures per graph (default 40)")
    p.add_argument("--k", type=int, default=10, help="largest attack size (default 10)")
    p.add_argument("--draws", type=int, default=20, help="operating points for the attack comparison (default 20)")
    p.add_argument("--cap", type=int, default=2000, help="brute-force cap in the attack comparison (default 2000)")
    p.add_argument("--n-sd", type=int)
    p.add_argument("--fos", type=float, default=1.1)

    p = sub.add_parser("metrics", help="metrics for an instance and a saved trace")
    common(p)
    p.add_argument("--trace", type=Path, required=True)
    return parser


def _emit_json(doc: dict, path: Path | None, cfg) -> None:
    if cfg.timestamp:
        doc = {**doc, "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _emit_csv(rows: list[dict], path: Path | None) -> None:
    fh = sys.stdout if path is None else open(path, "w", newline="")
    try:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    finally:
        if path is not None:
            fh.close()


def _load(args) -> Grid:
    if not args.input.exists():
        raise errors.ValidationError("--input", f"{args.input} does not exist")
    return load_instance(args.input, shed=getattr(args, "shed", False))


def cmd_solve(args) -> int:
    g = _load(args)
    p = pseudo_inverse(admittance_matrix(g))
    state = solve_flows(g, p)
    over = overloaded_lines(state.flows, g.capacity)
    _emit_json(
        {
            "flows": {str(e): float(f) for e, f in enumerate(state.flows)},
            "angles": [float(a) for a in state.angles],
            "feasible": not over,
            "overloaded": over,
        },
        args.output,
        args,
    )
    return EXIT_OK


def cmd_cascade(args) -> int:
    g = _load(args)
    trace = ENGINES[args.engine](g, args.f0)
    metrics = cascade_metrics(g, trace)
    doc = {"trace": trace.to_dict(), "metrics": metrics.as_row()}
    _emit_json(doc, args.output, args)
    return EXIT_OK


def cmd_attack(args) -> int:
    g = _load(args)
    result = run_attack(g, args.method, args.k, seed=args.seed, cap=args.cap)
    if args.trace is not None:
        _emit_json({"trace": result.trace.to_dict()}, args.trace, args)
    summary = {
        "method": result.method,
        "chosen": list(result.chosen),
        "yield": result.yield_,
        "trace": str(args.trace) if args.trace else None,
    }
    _emit_json(summary, args.output, args)
    return EXIT_OK


def _parse_params(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, _, value = item.partition("=")
        if not _:
            raise errors.ValidationError("--param", f"expected key=value, got {item!r}")
        try:
            out[key] = int(value)
        except ValueError:
            out[key] = float(value)
    return out


def cmd_generate(args) -> int:
    if args.fixture:
        g = fixture(args.fixture, **_parse_params(args.param))
    else:
        cfg = _config(args)
        g = generate(cfg.ensemble_spec(args.n[0], args.seed))
        if args.power_mode != "none":
            g = assign_operating_point(g, args.n_sd, args.power_mode, args.fos, args.seed)
    doc = g.to_dict()
    if args.timestamp:
        doc["meta"]["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = json.dumps(doc, indent=1) + "\n"
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text)
    return EXIT_OK


def _config(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        ensemble=getattr(args, "ensemble", "er"),
        n=getattr(args, "n", [100]),
        p=getattr(args, "p", None),
        knn=getattr(args, "knn", None),
        seed=args.seed,
    )


def bench_workload(spec: EnsembleSpec, fos: float, k: int, n_sd: int | None, seed: int) -> tuple[Grid, list[int]]:
    """Seeded operating point plus the ``k`` highest-scoring lines as the initial event."""
    g = assign_operating_point(generate(spec), n_sd, "pm1", fos, seed)
    return g, mves_rb(g, k)


def long_cascade_workloads(
    n: int = 200,
    p: float = 0.5,
    fos: float = 1.05,
    n_sd: int = 50,
    min_rounds: int = 10,
    count: int = 10,
    max_seeds: int = 500,
) -> list[tuple[int, Grid, list[int], int]]:
    """First ``count`` seeded ER workloads whose cascade lasts at least ``min_rounds`` rounds.

    Seeds are scanned in order; each tries the top MVES-RB line, then one
    random line. Returns ``(seed, grid, F0, t)`` tuples.
    """
    found = []
    for seed in range(max_seeds):
        g = assign_operating_point(generate(EnsembleSpec("er", n, p=p, seed=seed)), n_sd, "pm1", fos, seed)
        for f0 in (mves_rb(g, 1), list(random_attack(g, 1, seed))):
            t = run_cfe_pb(g, f0, check_initial=False).t
            if t >= min_rounds:
                found.append((seed, g, f0, t))
                break
        if len(found) == count:
            break
    return found


def time_engines(g: Grid, f0: list[int], repeats: int = 1) -> tuple[float, float, int]:
    """Best-of-``repeats`` wall times of CFE and CFE-PB, plus the cascade length."""
    cfe, pb = math.inf, math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        ref = run_cfe(g, f0, check_initial=False)
        t1 = time.perf_counter()
        run_cfe_pb(g, f0, check_initial=False)
        t2 = time.perf_counter()
        cfe, pb = min(cfe, t1 - t0), min(pb, t2 - t1)
    return cfe, pb, ref.t


def cmd_bench(args) -> int:
    if args.trials < 3:
        raise errors.ValidationError("--trials", "need at least 3 trials")
    cfg = _config(args)
    rows = []
    for n in args.n:
        for fos in args.fos:
            cfe, pb, ts = [], [], []
            for trial in range(args.trials):
                seed = args.seed + trial
                g, f0 = bench_workload(cfg.ensemble_spec(n, seed), fos, args.k, args.n_sd, seed)
                a, b, t = time_engines(g, f0)
                cfe.append(a)
                pb.append(b)
                ts.append(t)
            med_cfe, med_pb = statistics.median(cfe), statistics.median(pb)
            rows.append(
                {
                    "ensemble": args.ensemble,
                    "n": n,
                    "fos": fos,
                    "trials": args.trials,
                    "median_rounds": statistics.median(ts),
                    "median_cfe_s": f"{med_cfe:.6f}",
                    "median_cfe_pb_s": f"{med_pb:.6f}",
                    "speedup": f"{med_cfe / med_pb:.3f}",
                }
            )
    _emit_csv(rows, args.output)
    return EXIT_OK


def single_failure_rows(g: Grid, label: str, seed: int, trials: int) -> list[dict]:
    """``(d, r, S, M)`` rows for random non-cut single failures."""
    p = pseudo_inverse(admittance_matrix(g))
    state = solve_flows(g, p, shed_load(g.powers, p.labels))
    hops = HopMetric(g)
    cut = bridges(g)
    candidates = [e for e in range(g.n_lines) if e not in cut]
    rng = np.random.default_rng(seed)
    picks = rng.choice(candidates, size=min(trials, len(candidates)), replace=False) if candidates else []
    lines = g.lines
    rows = []
    for failed in sorted(int(e) for e in picks):
        delta = flow_change_single_failure(g, p, state, failed)
        ratios = change_ratios(state, delta, failed)
        for e in range(g.n_lines):
            if e == failed:
                continue
            rows.append(
                {
                    "graph": label,
                    "seed": seed,
                    "e": e,
                    "e_failed": failed,
                    "d": hops.edge_distance(e, failed),
                    "r": edge_resistance_distance(p, lines[e], lines[failed]),
                    "S": "" if math.isnan(ratios.S[e]) else float(ratios.S[e]),
                    "M": "" if math.isnan(ratios.M[e]) else float(ratios.M[e]),
                }
            )
    return rows


def node_distance_rows(g: Grid, label: str, seed: int, sample: int = 2000) -> list[dict]:
    p = pseudo_inverse(admittance_matrix(g))
    r = resistance_matrix(p)
    d = HopMetric(g).dist
    rng = np.random.default_rng(seed)
    n = g.n_buses
    i = rng.integers(n, size=sample)
    j = rng.integers(n, size=sample)
    keep = i < j
    return [
        {"graph": label, "seed": seed, "i": int(a), "j": int(b), "d": float(d[a, b]), "r": float(r[a, b])}
        for a, b in zip(i[keep], j[keep])
    ]


def attack_rows(g_topo: Grid, label: str, args) -> list[dict]:
    rows = []
    for draw in range(args.draws):
        g = assign_operating_point(g_topo, args.n_sd, "pm1", args.fos, args.seed + draw)
        for k in range(1, min(args.k, g.n_lines) + 1):
            y_mves = evaluate_attack(g, mves_rb(g, k)).yield_
            y_rand = evaluate_attack(g, random_attack(g, k, (args.seed, draw, k))).yield_
            rows.append({"graph": label, "draw": draw, "method": "mves_rb", "k": k, "yield": y_mves})
            rows.append({"graph": label, "draw": draw, "method": "random", "k": k, "yield": y_rand})
            try:
                y_opt = brute_force_min_yield(g, k, cap=args.cap).yield_
                rows.append({"graph": label, "draw": draw, "method": "brute_force", "k": k, "yield": y_opt})
            except errors.TooLargeError:
                pass
    return rows


def cmd_figdata(args) -> int:
    out = args.output or Path("figdata")
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    pairs, nodes, attacks = [], [], []
    for n in args.n:
        spec = cfg.ensemble_spec(n, args.seed)
        label = f"{spec.model}-n{n}"
        topo = generate(spec)
        g = assign_operating_point(topo, mode="normal", fos=args.fos, seed=args.seed)
        pairs += single_failure_rows(g, label, args.seed, args.trials)
        nodes += node_distance_rows(g, label, args.seed)
        attacks += attack_rows(topo, label, args)
    _emit_csv(pairs, out / "single_failure.csv")
    _emit_csv(nodes, out / "node_distances.csv")
    _emit_csv(attacks, out / "attack_comparison.csv")
    return EXIT_OK


def cmd_metrics(args) -> int:
    g = _load(args)
    doc = json.loads(args.trace.read_text())
    doc = doc.get("trace", doc)
    trace = trace_from_dict(g, doc)
    _emit_csv([cascade_metrics(g, trace).as_row()], args.output)
    return EXIT_OK


def trace_from_dict(g: Grid, doc: dict) -> CascadeTrace:
    """Rebuild enough of a trace (rounds and final injections) to compute metrics."""
    from .dcflow import FlowState

    rounds = [tuple(int(e) for e in r) for r in doc["rounds"]]
    final = np.asarray(doc["final_powers"], dtype=float)
    removed = np.zeros(g.n_lines, dtype=bool)
    for r in rounds:
        removed[list(r)] = True
    flows = np.full(g.n_lines, np.nan)
    for key, val in doc["snapshots"][-1]["flows"].items():
        flows[int(key)] = val
    state = FlowState(np.zeros(g.n_buses), flows, final)
    labels = component_labels(g, removed)
    return CascadeTrace(rounds, [state], [final], [labels], doc.get("engine", "unknown"))


COMMANDS = {
    "solve": cmd_solve,
    "cascade": cmd_cascade,
    "attack": cmd_attack,
    "generate": cmd_generate,
    "bench": cmd_bench,
    "figdata": cmd_figdata,
    "metrics": cmd_metrics,
}


def _fail(code: int, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except errors.TooLargeError as exc:
        return _fail(EXIT_CAP, exc)
    except errors.NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except (errors.GridCascadeError, OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(EXIT_INPUT, exc)


if __name__ == "__main__":
    sys.exit(main())
