"""Command line: coalition game, benchmarks, scalability sweep, standalone Shapley.

Tables go to ``--out`` as CSV with 3 decimals; a JSON sidecar next to each keeps
full precision. Exit codes: 0 ok, 1 usage, 2 infeasible, 3 empty Core, 4 budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import tomli

from . import game
from .bench import Sampled, run_aggregator_aware, run_aggregator_blind
from .routing import CoalitionOracle, Infeasible, SolverConfig, SolverTimeout, characteristic_function
from .scenario import Coalition, ScenarioError, coalition_iter
from .scenario_io import load_scenario
from .synth import MAX_AGGREGATORS, grid_scenario

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_EMPTY_CORE, EXIT_BUDGET = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class SweepSpec:
    node_counts: tuple[int, ...] = (9, 12, 15)
    aggregator_counts: tuple[int, ...] = (3, 4, 5, 6)
    seed: int = 7
    n_requests: int = 4

    def __post_init__(self):
        if not self.node_counts or not self.aggregator_counts:
            raise UsageError("sweep spec needs node_counts and aggregator_counts")
        if any(not 1 <= n <= MAX_AGGREGATORS for n in self.aggregator_counts):
            raise UsageError(f"aggregator counts must be 1..{MAX_AGGREGATORS}")
        if min(self.node_counts) < max(self.aggregator_counts):
            raise UsageError("node counts must be at least the aggregator count")
        if self.n_requests < 0:
            raise UsageError("n_requests must be nonnegative")


def load_sweep_spec(path) -> SweepSpec:
    try:
        raw = tomli.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read sweep spec {path}: {exc}") from exc
    unknown = set(raw) - {"node_counts", "aggregator_counts", "seed", "n_requests"}
    if unknown:
        raise UsageError(f"unknown sweep spec keys: {sorted(unknown)}")
    defaults = SweepSpec()
    return SweepSpec(
        tuple(int(v) for v in raw.get("node_counts", defaults.node_counts)),
        tuple(int(v) for v in raw.get("aggregator_counts", defaults.aggregator_counts)),
        int(raw.get("seed", defaults.seed)),
        int(raw.get("n_requests", defaults.n_requests)),
    )


# ------------------------------------------------------------------ output helpers


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        s = f"{v:.3f}"
        return "0.000" if s == "-0.000" else s
    return str(v)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8", newline="\n")


def _write_json(out: Path, name: str, data) -> None:
    _write(out, name, json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n")


def _config(args) -> SolverConfig:
    kw = {}
    if args.node_budget is not None:
        kw["node_budget"] = args.node_budget
    if args.time_budget is not None:
        kw["time_budget"] = args.time_budget
    return SolverConfig(**kw)


def _load(path):
    try:
        return load_scenario(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenario {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise UsageError(f"scenario {path} is not valid TOML: {exc}") from exc
    except ScenarioError as exc:
        raise UsageError(f"invalid scenario {path}:\n" + "\n".join(
            f"  {d.code} at {d.path}: {d.message}" for d in exc.diagnostics)) from exc


# ------------------------------------------------------------------ core reporting


def _core_report(cf: game.CharacteristicFunction) -> dict:
    check = game.core_feasible(cf)
    report = {"feasible": check.feasible, "max_cost": None, "vertices": None, "simplex": None}
    if not check.feasible:
        return report
    report["max_cost"] = list(game.core_max_costs(cf))
    if cf.n <= 4:
        poly = game.core_vertices(cf)
        report["vertices"] = [{"x": list(v.allocation.x), "binding": [s.label() for s in v.binding]}
                              for v in poly.vertices]
        coords = poly.simplex_coordinates(cf)
        if coords is not None:
            report["simplex"] = [list(c) for c in coords]
    return report


def _core_tables(out: Path, n: int, report: dict) -> None:
    xs = [f"x_{i}" for i in range(1, n + 1)]
    if not report["feasible"]:
        _write(out, "core_vertices.csv", _csv_text(["vertex", *xs], [["empty", *[None] * n]]))
        return
    if report["vertices"] is not None:
        rows = [[k + 1, *v["x"]] for k, v in enumerate(report["vertices"])]
        _write(out, "core_vertices.csv", _csv_text(["vertex", *xs], rows))
    _write(out, "core_max.csv", _csv_text(["player", "max_cost_usd"],
                                          [[i + 1, v] for i, v in enumerate(report["max_cost"])]))
    if report["simplex"] is not None:
        rows = [[k + 1, *c] for k, c in enumerate(report["simplex"])]
        _write(out, "core_simplex.csv", _csv_text(["vertex", "lambda_1", "lambda_2", "lambda_3", "u", "v"], rows))


# ------------------------------------------------------------------ commands


def _table_order(n: int) -> list[Coalition]:
    """Singletons first, then pairs, and so on; members in lexicographic order within a size."""
    return sorted(coalition_iter(n), key=lambda s: (len(s), s.members))


def cmd_game(args) -> int:
    scenario = _load(args.scenario)
    n = scenario.n_players
    out = Path(args.out)
    status = EXIT_OK
    solves = {}
    if args.override:
        cf = _read_cfn(args.override)
        if cf.n != n:
            raise UsageError(f"override has {cf.n} players but the scenario has {n}")
    else:
        oracle = CoalitionOracle(scenario, _config(args))
        try:
            cf, solves = characteristic_function(scenario, oracle=oracle)
        except SolverTimeout as exc:
            print(f"budget exhausted: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        bad = [(m, v) for m, v in sorted(solves.items()) if not v.feasible]
        if bad:
            for m, v in bad:
                print(f"coalition {Coalition(m).label()} infeasible: {v.infeasible_reason}", file=sys.stderr)
            return EXIT_INFEASIBLE
        if any(not v.solution.optimal for v in solves.values()):
            status = EXIT_BUDGET

    phi = game.shapley(cf)
    report = _core_report(cf)
    grand = Coalition.grand(n)
    header = ["coalition", "value_usd", *[f"phi_{i}" for i in range(1, n + 1)], "energy_kwh"]
    rows = []
    for s in _table_order(n):
        if s == grand:
            shares = list(phi.x)
        else:
            # members' shares of the sub-coalition's own value, as in the published layout
            sub_phi = game.shapley(game.subgame(cf, s)).x
            shares = [sub_phi[s.members.index(i)] if i in s else None for i in range(1, n + 1)]
        rows.append([s.label(), cf.cost(s), *shares, cf.energy(s)])
    table = _csv_text(header, rows)
    _write(out, "game.csv", table)
    _core_tables(out, n, report)
    sidecar = {
        "scenario": scenario.name,
        "source": "override" if args.override else "routing",
        "coalitions": {s.label(): {"cost": cf.cost(s), "energy": cf.energy(s),
                                   "optimal": solves[s.mask].solution.optimal if s.mask in solves else None,
                                   "gap": solves[s.mask].solution.gap if s.mask in solves else None}
                       for s in _table_order(n)},
        "shapley": list(phi.x),
        "subgame_shapley": {s.label(): list(game.shapley(game.subgame(cf, s)).x) for s in _table_order(n)},
        "shapley_in_core": bool(game.in_core(cf, phi)) if report["feasible"] else False,
        "core": report,
    }
    _write_json(out, "game.json", sidecar)
    sys.stdout.write(table)
    if not report["feasible"]:
        print("core: empty")
        return EXIT_EMPTY_CORE
    print("core: nonempty")
    return status


def cmd_bench(args) -> int:
    scenario = _load(args.scenario)
    out = Path(args.out)
    oracle = CoalitionOracle(scenario, _config(args))
    try:
        if args.mode == "blind":
            if args.samples is not None or args.prior is not None:
                raise UsageError("--samples, --seed and --prior apply to aware mode only")
            res = run_aggregator_blind(scenario, oracle=oracle)
        else:
            prior = None
            if args.prior is not None:
                vals = [float(v) for v in args.prior.split(",")]
                if len(vals) != scenario.n_players:
                    raise UsageError(f"--prior needs {scenario.n_players} values")
                prior = {a.id: p for a, p in zip(sorted(scenario.aggregators, key=lambda a: a.id), vals)}
            mode = Sampled(args.samples, args.seed) if args.samples is not None else None
            try:
                res = run_aggregator_aware(scenario, prior, mode, oracle=oracle)
            except ValueError as exc:
                if isinstance(exc, Infeasible):
                    raise
                raise UsageError(str(exc)) from exc
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverTimeout as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET

    rows = [[a, c, e] for a, (c, e) in sorted(res.per_aggregator.items())]
    table = _csv_text(["aggregator", "value_usd", "energy_kwh"], rows)
    _write(out, f"bench_{args.mode}.csv", table)
    _write_json(out, f"bench_{args.mode}.json", {
        "scenario": scenario.name,
        "mode": res.mode,
        "exact": res.exact,
        "sample_count": res.sample_count,
        "seed": res.seed,
        "infeasible_mass": res.infeasible_mass,
        "per_aggregator": {a: {"cost": c, "energy": e, "standard_error": res.standard_errors.get(a)}
                           for a, (c, e) in sorted(res.per_aggregator.items())},
        "total_cost": res.total_cost,
        "optimal": res.optimal,
    })
    sys.stdout.write(table)
    if res.mode == "aware":
        how = "exact" if res.exact else f"sampled count={res.sample_count} seed={res.seed}"
        print(f"# {how} infeasible_mass={_fmt(res.infeasible_mass)}")
    return EXIT_OK if res.optimal else EXIT_BUDGET


def run_sweep(spec: SweepSpec, config: SolverConfig | None = None) -> list[dict]:
    rows = []
    for J in spec.node_counts:
        for n in spec.aggregator_counts:
            sc = grid_scenario(J, n, seed=spec.seed, n_requests=spec.n_requests)
            row = {"J": J, "n_aggregators": n, "energy_kwh": None, "cost_usd": None, "status": "ok"}
            try:
                v = CoalitionOracle(sc, config).value(Coalition.grand(n))
            except SolverTimeout as exc:
                row["status"] = f"budget: {exc}"
            else:
                if v.feasible:
                    row["energy_kwh"], row["cost_usd"] = v.energy, v.cost
                    if not v.solution.optimal:
                        row["status"] = f"budget: gap {v.solution.gap:.3g}"
                else:
                    row["status"] = f"infeasible: {v.infeasible_reason}"
            rows.append(row)
    return rows


def sweep_trend(rows: list[dict]) -> dict[int, bool]:
    """Per J: is grand-coalition energy non-increasing in the aggregator count?"""
    out = {}
    for J in dict.fromkeys(r["J"] for r in rows):
        es = [r["energy_kwh"] for r in sorted((r for r in rows if r["J"] == J), key=lambda r: r["n_aggregators"])]
        out[J] = all(e is not None for e in es) and all(b <= a + 1e-9 for a, b in zip(es, es[1:]))
    return out


def cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.spec)
    out = Path(args.out)
    rows = run_sweep(spec, _config(args))
    trend = sweep_trend(rows)
    header = ["J", "n_aggregators", "energy_kwh", "cost_usd", "status", "energy_nonincreasing"]
    table = _csv_text(header, [[r["J"], r["n_aggregators"], r["energy_kwh"], r["cost_usd"], r["status"],
                                str(trend[r["J"]]).lower()] for r in rows])
    _write(out, "sweep.csv", table)
    _write_json(out, "sweep.json", {"spec": {"node_counts": list(spec.node_counts),
                                             "aggregator_counts": list(spec.aggregator_counts),
                                             "seed": spec.seed, "n_requests": spec.n_requests},
                                    "rows": rows, "energy_nonincreasing": trend})
    sys.stdout.write(table)
    return EXIT_BUDGET if any(r["status"].startswith("budget") for r in rows) else EXIT_OK


def _read_cfn(path) -> game.CharacteristicFunction:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        return game.parse_cfn(text)
    except game.IncompleteFunction as exc:
        raise UsageError(f"IncompleteFunction: missing coalition {exc.missing.label()}") from exc
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_shapley(args) -> int:
    cf = _read_cfn(args.cfn)
    try:
        cf.check()
    except game.InfiniteCost as exc:
        raise UsageError(str(exc)) from exc
    phi = game.shapley(cf)
    report = _core_report(cf)
    inside = game.in_core(cf, phi)
    lines = ["shapley," + ",".join(_fmt(v) for v in phi.x),
             f"core,{'nonempty' if report['feasible'] else 'empty'}"]
    if report["feasible"]:
        lines.append("core_max," + ",".join(_fmt(v) for v in report["max_cost"]))
    lines.append(f"shapley_in_core,{str(bool(inside)).lower()}")
    for v in inside.violations:
        lines.append(f"violation,{v.constraint},{_fmt(v.slack)}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        _write(out, "shapley.txt", text)
        _write_json(out, "shapley.json", {"n": cf.n, "shapley": list(phi.x), "core": report,
                                          "shapley_in_core": bool(inside),
                                          "violations": [[v.constraint, v.slack] for v in inside.violations]})
        _core_tables(out, cf.n, report)
    return EXIT_OK if report["feasible"] else EXIT_EMPTY_CORE


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default="fleetcoop-out", help="output directory")
    common.add_argument("--node-budget", type=_positive(int), default=None)
    common.add_argument("--time-budget", type=_positive(float), default=None, help="seconds per solve")

    p = _Parser(prog="fleetcoop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("game", parents=[common], help="characteristic function, Shapley value and Core")
    g.add_argument("scenario")
    g.add_argument("--override", help="characteristic-function file used instead of routing solves")
    g.set_defaults(func=cmd_game)

    b = sub.add_parser("bench", parents=[common], help="aggregator-aware / aggregator-blind baselines")
    b.add_argument("scenario")
    b.add_argument("--mode", choices=["aware", "blind"], required=True)
    b.add_argument("--samples", type=_positive(int), default=None, help="Monte Carlo samples (aware)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--prior", default=None, help="comma-separated probabilities by aggregator id")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", parents=[common], help="grand-coalition energy over synthetic scenarios")
    s.add_argument("spec")
    s.set_defaults(func=cmd_sweep)

    sh = sub.add_parser("shapley", parents=[common], help="Shapley value and Core of a characteristic-function file")
    sh.add_argument("cfn")
    sh.set_defaults(func=cmd_shapley, out=None)
    return p


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError("must be positive")
        return val
    return conv


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
