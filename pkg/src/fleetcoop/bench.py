"""Non-cooperative baselines under incomplete information.

Aggregator-aware: every request independently picks an aggregator by a common prior,
and each aggregator then serves what it drew with its own vehicles and chargers.
The state of the world is the assignment profile; each aggregator only observes which
requests landed on it. Aggregator-blind: one central dispatch over all fleets, but
vehicles only charge at their owner's stations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .routing import CoalitionOracle, Infeasible, SolverConfig
from .scenario import Coalition, Scenario

DEFAULT_SAMPLES = 10_000
MAX_EXACT_PROFILES = 200_000  # exact enumeration below this many profiles


@dataclass(frozen=True)
class Sampled:
    count: int
    seed: int = 0


@dataclass
class AumannModel:
    """Players, assignment profiles (states), what each player can tell apart, and the prior."""

    players: tuple[int, ...]
    request_ids: tuple[int, ...]
    prior: dict[int, float]

    @property
    def n_states(self) -> int:
        return len(self.players) ** len(self.request_ids)

    def states(self):
        """Every profile as a tuple of aggregator ids, one per request."""
        return itertools.product(self.players, repeat=len(self.request_ids))

    def probability(self, state: tuple[int, ...]) -> float:
        return math.prod(self.prior[a] for a in state)

    def cell(self, player: int, state: tuple[int, ...]) -> frozenset[int]:
        """Label of the partition cell of ``player`` holding ``state``: the requests it drew."""
        return frozenset(r for r, a in zip(self.request_ids, state) if a == player)

    def nature(self, state: tuple[int, ...]) -> dict[int, tuple[int, ...]]:
        """Per-aggregator workload in ``state``."""
        return {a: tuple(sorted(self.cell(a, state))) for a in self.players}


@dataclass
class BenchmarkResult:
    mode: str  # "aware" | "blind"
    per_aggregator: dict[int, tuple[float, float]]  # id -> (expected cost $, expected energy kWh)
    exact: bool = True
    sample_count: int | None = None
    seed: int | None = None
    infeasible_mass: float = 0.0
    standard_errors: dict[int, float] = field(default_factory=dict)
    optimal: bool = True

    @property
    def total_cost(self) -> float:
        return sum(c for c, _ in self.per_aggregator.values())

    @property
    def total_energy(self) -> float:
        return sum(e for _, e in self.per_aggregator.values())


def aumann_model(scenario: Scenario, prior: dict[int, float] | None = None) -> AumannModel:
    players = tuple(a.id for a in scenario.aggregators)
    if prior is None:
        prior = {a: 1.0 / len(players) for a in players}
    if set(prior) != set(players):
        raise ValueError("prior must name every aggregator exactly once")
    if any(not p > 0 for p in prior.values()):
        raise ValueError("prior must be strictly positive")
    if abs(sum(prior.values()) - 1.0) > 1e-9:
        raise ValueError("prior must sum to 1")
    return AumannModel(players, tuple(r.id for r in scenario.requests), dict(prior))


class _WorkloadTable:
    """Cost and energy of each aggregator serving each subset of requests (bitmask), solved on demand."""

    def __init__(self, scenario: Scenario, oracle: CoalitionOracle):
        self.scenario = scenario
        self.oracle = oracle
        self.values: dict[tuple[int, int], tuple[float, float, bool]] = {}

    def get(self, player_index: int, mask: int) -> tuple[float, float, bool]:
        key = (player_index, mask)
        if key not in self.values:
            agg = self.scenario.aggregators[player_index]
            reqs = [r for i, r in enumerate(self.scenario.requests) if mask >> i & 1]
            if not reqs:
                self.values[key] = (0.0, 0.0, True)
            else:
                v = self.oracle.value(Coalition.of(agg.id), reqs)
                ok = v.feasible
                self.values[key] = (v.cost if ok else math.nan, v.energy if ok else math.nan,
                                    ok and v.solution.optimal)
        return self.values[key]


def _profile_masks(assign: np.ndarray, n_players: int) -> np.ndarray:
    """assign: profiles x requests of player indices -> profiles x players of request bitmasks."""
    weights = (1 << np.arange(assign.shape[1], dtype=np.int64))
    return np.stack([((assign == p) * weights).sum(axis=1) for p in range(n_players)], axis=1)


def _evaluate(table: _WorkloadTable, masks: np.ndarray, n_players: int):
    uniq = {}
    cost = np.empty(masks.shape, dtype=float)
    energy = np.empty(masks.shape, dtype=float)
    optimal = True
    for p in range(n_players):
        for m in sorted(set(masks[:, p].tolist())):
            uniq[(p, m)] = table.get(p, m)
            optimal &= uniq[(p, m)][2]
        cost[:, p] = [uniq[(p, m)][0] for m in masks[:, p].tolist()]
        energy[:, p] = [uniq[(p, m)][1] for m in masks[:, p].tolist()]
    feasible = ~np.isnan(cost).any(axis=1)
    return cost, energy, feasible, optimal


def run_aggregator_aware(scenario: Scenario, prior: dict[int, float] | None = None, mode: str | Sampled | None = None,
                         config: SolverConfig | None = None, oracle: CoalitionOracle | None = None) -> BenchmarkResult:
    """Expected per-aggregator cost and energy when requests pick aggregators by ``prior``.

    ``mode`` is ``"exact"``, ``Sampled(count, seed)`` or None (exact when the number of
    profiles is at most ``MAX_EXACT_PROFILES``, else ``DEFAULT_SAMPLES`` samples with seed 0).
    Profiles where some aggregator cannot serve its draw are left out of the average;
    their probability (or sample share) is ``infeasible_mass``.
    """
    model = aumann_model(scenario, prior)
    n, R = len(model.players), len(model.request_ids)
    if mode is None:
        mode = "exact" if n ** R <= MAX_EXACT_PROFILES else Sampled(DEFAULT_SAMPLES, 0)
    oracle = oracle or CoalitionOracle(scenario, config)
    table = _WorkloadTable(scenario, oracle)
    p = np.array([model.prior[a] for a in model.players])

    if mode == "exact":
        assign = np.array(list(itertools.product(range(n), repeat=R)), dtype=np.int64).reshape(n ** R, R)
        prob = np.prod(p[assign], axis=1) if R else np.ones(1)
        cost, energy, feasible, optimal = _evaluate(table, _profile_masks(assign, n), n)
        mass = float(prob[feasible].sum())
        bad = float(prob[~feasible].sum())
        if mass <= 0:
            raise Infeasible("every assignment profile leaves some aggregator unable to serve its requests")
        w = prob[feasible] / mass
        exp_c = w @ cost[feasible]
        exp_e = w @ energy[feasible]
        per = {a: (float(exp_c[i]), float(exp_e[i])) for i, a in enumerate(model.players)}
        return BenchmarkResult("aware", per, True, None, None, bad, {}, optimal)

    if not isinstance(mode, Sampled) or mode.count < 1:
        raise ValueError("mode must be 'exact' or Sampled(count >= 1, seed)")
    rng = np.random.Generator(np.random.Philox(key=mode.seed))
    # all draws come from one stream up front, so solve order cannot change the sample
    u = rng.random((mode.count, R))
    assign = np.searchsorted(np.cumsum(p)[:-1], u, side="right").astype(np.int64)
    cost, energy, feasible, optimal = _evaluate(table, _profile_masks(assign, n), n)
    k = int(feasible.sum())
    if k == 0:
        raise Infeasible("no sampled assignment profile is feasible")
    c, e = cost[feasible], energy[feasible]
    per = {a: (float(c[:, i].mean()), float(e[:, i].mean())) for i, a in enumerate(model.players)}
    se = {a: float(c[:, i].std(ddof=1) / math.sqrt(k)) if k > 1 else math.inf for i, a in enumerate(model.players)}
    return BenchmarkResult("aware", per, False, mode.count, mode.seed, 1.0 - k / mode.count, se, optimal)


def run_aggregator_blind(scenario: Scenario, config: SolverConfig | None = None,
                         oracle: CoalitionOracle | None = None) -> BenchmarkResult:
    """Central dispatch of every fleet over all requests, each vehicle charging only at its owner's stations."""
    oracle = oracle or CoalitionOracle(scenario, config)
    v = oracle.blind()
    if not v.feasible:
        raise Infeasible(v.infeasible_reason or "blind dispatch is infeasible")
    per = {a.id: v.solution.per_aggregator.get(a.id, (0.0, 0.0)) for a in scenario.aggregators}
    return BenchmarkResult("blind", per, True, optimal=v.solution.optimal)
