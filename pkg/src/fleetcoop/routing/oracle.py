"""Coalition values: the cost of a coalition serving a workload with pooled assets."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from ..game import CharacteristicFunction
from ..grid import Feeder
from ..scenario import Coalition, Request, Scenario, coalition_iter
from .model import Infeasible, RoutingProblem
from .paths import ShortestPaths
from .solution import RoutingSolution, build_solution
from .solver import BranchAndBound, SolverConfig

INFEASIBLE_COST = math.inf


@dataclass(frozen=True)
class CoalitionValue:
    cost: float
    energy: float
    solution: RoutingSolution | None
    infeasible_reason: str | None = None

    @property
    def feasible(self) -> bool:
        return self.solution is not None


def solve_problem(problem: RoutingProblem, config: SolverConfig | None = None) -> RoutingSolution:
    """Optimal plan for ``problem``; raises Infeasible with a certificate request when none exists."""
    bnb = BranchAndBound(problem, config)
    try:
        res = bnb.solve()
    except Infeasible as exc:
        if exc.request is None and problem.requests:
            exc = _certificate(problem, exc, config)
        raise exc
    return build_solution(problem, res.timelines, res.charges, res.optimal, res.gap, res.nodes)


def _certificate(problem: RoutingProblem, exc: Infeasible, config: SolverConfig | None) -> Infeasible:
    """Name the earliest request that no vehicle can serve even on its own."""
    if "voltage" in str(exc):
        return exc
    ordered = sorted(problem.requests, key=lambda r: (r.earliest_pickup_step, r.id))
    for r in ordered:
        alone = RoutingProblem(problem.scenario, problem.vehicles, [r], problem.allowed, problem.coalition,
                               paths=problem.paths, feeder=problem.feeder)
        try:
            BranchAndBound(alone, config).solve()
        except Infeasible:
            return Infeasible(f"request {r.id} cannot be served by any vehicle within horizon, battery and grid limits",
                              r.id)
    last = ordered[-1]
    return Infeasible(f"requests cannot all be served together; request {last.id} is the latest to start", last.id)


class CoalitionOracle:
    """Caches coalition solves for one scenario. Safe to share between threads."""

    def __init__(self, scenario: Scenario, config: SolverConfig | None = None):
        self.scenario = scenario
        self.config = config or SolverConfig()
        self.paths = ShortestPaths(scenario)
        self.feeder = Feeder(scenario.grid)
        self._cache: dict[tuple, CoalitionValue] = {}
        self._lock = threading.Lock()
        self.solves = 0
        self.nodes = 0

    def _key(self, kind: str, mask: int, requests) -> tuple:
        ids = tuple(sorted(r.id for r in (self.scenario.requests if requests is None else requests)))
        return kind, mask, ids

    def _lookup(self, key, build) -> CoalitionValue:
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        problem = build()
        try:
            sol = solve_problem(problem, self.config)
            value = CoalitionValue(sol.objective_cost, sol.total_energy_kwh, sol)
            nodes = sol.nodes
        except Infeasible as exc:
            value = CoalitionValue(INFEASIBLE_COST, math.nan, None, str(exc))
            nodes = 0
        with self._lock:
            self.solves += 1
            self.nodes += nodes
            return self._cache.setdefault(key, value)

    def value(self, coalition: Coalition, requests: list[Request] | None = None) -> CoalitionValue:
        key = self._key("coalition", coalition.mask, requests)
        return self._lookup(key, lambda: RoutingProblem.for_coalition(
            self.scenario, coalition, requests, paths=self.paths, feeder=self.feeder))

    def blind(self, requests: list[Request] | None = None) -> CoalitionValue:
        key = self._key("blind", Coalition.grand(self.scenario.n_players).mask, requests)
        return self._lookup(key, lambda: RoutingProblem.blind(
            self.scenario, requests, paths=self.paths, feeder=self.feeder))


def coalition_value(scenario: Scenario, coalition: Coalition, requests: list[Request] | None = None,
                    config: SolverConfig | None = None, oracle: CoalitionOracle | None = None) -> CoalitionValue:
    """Minimum operating cost and driving energy of ``coalition`` serving ``requests`` (default: all).

    Infeasible coalitions come back with cost ``inf`` and the certificate in ``infeasible_reason``.
    """
    if coalition.mask == 0:
        raise ValueError("coalition must be nonempty")
    oracle = oracle or CoalitionOracle(scenario, config)
    return oracle.value(coalition, requests)


def characteristic_function(scenario: Scenario, config: SolverConfig | None = None,
                            oracle: CoalitionOracle | None = None) -> tuple[CharacteristicFunction, dict[int, CoalitionValue]]:
    """Solve every nonempty coalition on the full workload.

    Returns the game (infeasible coalitions carry ``inf`` cost, which the game layer rejects)
    and the per-coalition solves keyed by bitmask.
    """
    oracle = oracle or CoalitionOracle(scenario, config)
    values = {s.mask: oracle.value(s) for s in coalition_iter(scenario.n_players)}
    cf = CharacteristicFunction(
        scenario.n_players,
        {m: v.cost for m, v in values.items()},
        {m: v.energy for m, v in values.items()},
    )
    return cf, values
