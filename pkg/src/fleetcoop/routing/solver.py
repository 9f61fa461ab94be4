"""Best-first branch-and-bound over vehicle plans.

Vehicles are planned one after another in id order. A search node holds the
finished plans of earlier vehicles and a partial plan for the current one; its
children append an unserved request, append a charging stop, or close the
vehicle. The bound adds, for every unserved request, its ride distance plus the
shortest approach from any place a vehicle could come from, and prices any
energy the open vehicles cannot carry at the cheapest reachable tariff.
Charging limits that couple vehicles (shared chargers, voltage drops) only raise
costs, so bounds use the uncoupled per-vehicle LPs and leaves re-solve jointly.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import Infeasible, RoutingProblem, SolverTimeout, Timeline, overlapping_charging

log = logging.getLogger(__name__)

KEY_DIGITS = 10


@dataclass
class SolverConfig:
    node_budget: int = 5_000_000
    time_budget: float | None = None  # seconds
    log_every: int = 0  # progress tick every N expanded nodes; 0 disables
    progress: object = None  # optional callable(nodes, incumbent, bound)


@dataclass
class SearchResult:
    timelines: list[Timeline]
    charges: list[np.ndarray]  # kWh per slot, aligned with timelines
    cost: float
    optimal: bool
    gap: float
    nodes: int


@dataclass
class _Node:
    k: int  # index of the vehicle being planned
    items: tuple
    closed: tuple  # finished Timelines
    served: int  # bitmask over problem.requests
    closed_dist: float
    closed_charge: float  # sum of uncoupled per-vehicle charging costs
    tl: Timeline | None = None
    charge: float = 0.0
    depth: int = 0
    leaf_charges: list | None = field(default=None)


class BranchAndBound:
    def __init__(self, problem: RoutingProblem, config: SolverConfig | None = None):
        self.p = problem
        self.cfg = config or SolverConfig()
        sc = problem.scenario
        self.w_e = sc.energy_price_weight
        self.w_d = sc.distance_weight
        self.vehicles = problem.vehicles
        self.requests = problem.requests
        self.bit = {r.id: 1 << i for i, r in enumerate(self.requests)}
        self.all_served = (1 << len(self.requests)) - 1
        self._lp_cache: dict[tuple, tuple[float, np.ndarray] | None] = {}
        self._tl_cache: dict[tuple, Timeline] = {}
        self.nodes = 0
        self.incumbent = math.inf

        nv = len(self.vehicles)
        # suffix aggregates over vehicles k.. for the open-energy bound
        self.soc_suffix = [0.0] * (nv + 1)
        self.cons_suffix = [math.inf] * (nv + 1)
        self.price_suffix = [math.inf] * (nv + 1)
        self.seats_suffix = [0] * (nv + 1)
        for k in range(nv - 1, -1, -1):
            v = self.vehicles[k]
            prices = [problem.chargers[c].price(t) for c in problem.allowed[v.id] for t in range(problem.horizon)]
            self.soc_suffix[k] = self.soc_suffix[k + 1] + v.initial_soc_kwh
            self.cons_suffix[k] = min(self.cons_suffix[k + 1], v.consumption_kwh_per_km)
            self.price_suffix[k] = min([self.price_suffix[k + 1]] + prices)
            self.seats_suffix[k] = max(self.seats_suffix[k + 1], v.seat_capacity)
        self.twin_of_prev = [False] * nv
        for k in range(1, nv):
            a, b = self.vehicles[k - 1], self.vehicles[k]
            self.twin_of_prev[k] = (
                a.owner == b.owner
                and problem.depot[a.id] == problem.depot[b.id]
                and (a.battery_capacity_kwh, a.initial_soc_kwh, a.consumption_kwh_per_km, a.seat_capacity)
                == (b.battery_capacity_kwh, b.initial_soc_kwh, b.consumption_kwh_per_km, b.seat_capacity)
                and problem.allowed[a.id] == problem.allowed[b.id]
            )

    # ----------------------------------------------------------------- helpers

    def _timeline(self, vid: int, items: tuple, closing: bool) -> Timeline:
        key = (vid, items, closing)
        tl = self._tl_cache.get(key)
        if tl is None:
            tl = self.p.timeline(vid, items, closing)
            self._tl_cache[key] = tl
        return tl

    def _solo_lp(self, tl: Timeline):
        key = (tl.vehicle, tl.items, len(tl.events))
        if key not in self._lp_cache:
            self._lp_cache[key] = self.p.solo_charging(tl)
        return self._lp_cache[key]

    def _first_request(self, items: tuple) -> int | None:
        return next((it[1] for it in items if it[0] == "R"), None)

    def _bound(self, node: _Node, with_current_charge: bool = True) -> float | None:
        """Lower bound on any completion of ``node``; None if provably infeasible.

        Without the current vehicle's partial charging cost the bound holds for every
        dwell length of a trailing charging stop.
        """
        p = self.p
        paths = p.paths
        H = p.horizon
        tl = node.tl
        unserved = [r for r in self.requests if not node.served & self.bit[r.id]]
        sources: list[tuple[int, int]] = [(tl.end_node, tl.end_step)]
        sources += [(p.depot[v.id], 0) for v in self.vehicles[node.k + 1:]]
        rem = 0.0
        for r in unserved:
            if r.passengers > max(self.seats_suffix[node.k + 1], p.vehicle_by_id[tl.vehicle].seat_capacity):
                return None
            best = math.inf
            t_best = math.inf
            for src, avail in sources:
                best = min(best, paths.distance[src][r.origin])
                t_best = min(t_best, avail + paths.fastest[src][r.origin])
            for q in unserved:
                if q.id != r.id:
                    best = min(best, paths.distance[q.destination][r.origin])
                    t_q = max(q.earliest_pickup_step, 0) + paths.fastest[q.origin][q.destination]
                    t_best = min(t_best, t_q + paths.fastest[q.destination][r.origin])
            if max(t_best, r.earliest_pickup_step) + paths.fastest[r.origin][r.destination] > H:
                return None
            rem += best + paths.distance[r.origin][r.destination]

        v = p.vehicle_by_id[tl.vehicle]
        need = tl.consumption_kwh + min(self.cons_suffix[node.k], v.consumption_kwh_per_km) * rem
        have = v.initial_soc_kwh + self.soc_suffix[node.k + 1]
        deficit = need - have
        open_charge = node.charge if with_current_charge else 0.0
        if deficit > 1e-9:
            price = self.price_suffix[node.k]
            if not math.isfinite(price):
                return None
            open_charge = max(open_charge, price * deficit)
        dist = node.closed_dist + tl.distance_km + rem
        return self.w_d * dist + self.w_e * (node.closed_charge + open_charge)

    # ----------------------------------------------------------------- search

    def _make(self, k: int, items: tuple, closed: tuple, served: int, closed_dist: float,
              closed_charge: float, depth: int) -> _Node | None:
        vid = self.vehicles[k].id
        tl = self._timeline(vid, items, False)
        if not tl.feasible:
            return None
        res = self._solo_lp(tl)
        if res is None:
            return None
        return _Node(k, items, closed, served, closed_dist, closed_charge, tl, res[0], depth)

    def _children(self, node: _Node):
        p = self.p
        k = node.k
        v = self.vehicles[k]
        last_is_charge = bool(node.items) and node.items[-1][0] == "C"
        unserved = [r for r in self.requests if not node.served & self.bit[r.id]]

        twin_floor = None
        if self.twin_of_prev[k]:
            prev_first = self._first_request(node.closed[-1].items)
            if prev_first is None:
                unserved = []  # an unused twin forces this vehicle to stay unused
            elif self._first_request(node.items) is None:
                twin_floor = prev_first

        for r in unserved:
            if twin_floor is not None and r.id <= twin_floor:
                continue
            child = self._make(k, node.items + (("R", r.id),), node.closed, node.served | self.bit[r.id],
                               node.closed_dist, node.closed_charge, node.depth + 1)
            if child is not None:
                yield child

        if not last_is_charge and (unserved or (p.scenario.return_to_depot and node.items)):
            for cid in p.allowed[v.id]:
                first = self._timeline(v.id, node.items + (("C", cid, 1),), False)
                if not first.feasible:
                    continue  # longer stays end even later
                probe = _Node(k, first.items, node.closed, node.served, node.closed_dist, node.closed_charge, first)
                lb = self._bound(probe, with_current_charge=False)
                if lb is None or lb > self.incumbent + 10 ** -KEY_DIGITS:
                    continue
                for dwell in range(1, p.horizon + 1):
                    items = node.items + (("C", cid, dwell),)
                    if not self._timeline(v.id, items, False).feasible:
                        break
                    child = self._make(k, items, node.closed, node.served,
                                       node.closed_dist, node.closed_charge, node.depth + 1)
                    if child is not None:
                        yield child

        if last_is_charge and not (p.scenario.return_to_depot and node.items):
            return
        tl = self._timeline(v.id, node.items, True)
        if not tl.feasible:
            return
        res = self._solo_lp(tl)
        if res is None:
            return
        closed = node.closed + (tl,)
        dist = node.closed_dist + tl.distance_km
        charge = node.closed_charge + res[0]
        if k + 1 < len(self.vehicles):
            child = self._make(k + 1, (), closed, node.served, dist, charge, node.depth + 1)
            if child is not None:
                yield child
        elif node.served == self.all_served:
            yield self._leaf(closed, dist, node.depth + 1)

    def _leaf(self, closed: tuple, dist: float, depth: int) -> _Node | None:
        timelines = list(closed)
        if overlapping_charging(timelines):
            res = self.p.charging_lp(timelines, coupled=True)
            if res is None:
                return None
            charge, per = res
        else:
            charge = 0.0
            per = []
            for tl in timelines:
                c, x = self._solo_lp(tl)
                charge += c
                per.append(x[0])
        leaf = _Node(len(self.vehicles), (), closed, self.all_served, dist, charge, None, 0.0, depth)
        leaf.leaf_charges = per
        return leaf

    def _cost(self, node: _Node) -> float:
        return self.w_d * node.closed_dist + self.w_e * node.closed_charge

    def solve(self) -> SearchResult:
        p = self.p
        if not self.vehicles:
            if self.requests:
                raise Infeasible("coalition has no vehicles", self.requests[0].id)
        bad_step = p.base_grid_violation()
        if bad_step is not None:
            raise Infeasible(f"base load violates voltage limits at step {bad_step}")
        if not self.vehicles:
            return SearchResult([], [], 0.0, True, 0.0, 0)

        cfg = self.cfg
        started = time.monotonic()
        counter = itertools.count()
        heap: list = []
        incumbent = math.inf
        best_leaf = None

        root = self._make(0, (), (), 0, 0.0, 0.0, 0)
        if root is not None:
            lb = self._bound(root)
            if lb is not None:
                heapq.heappush(heap, (round(lb, KEY_DIGITS), 0, next(counter), root))

        while heap:
            key, _, _, node = heapq.heappop(heap)
            if node.tl is None:  # leaf: every open node is at least as expensive
                return self._result(node, True, 0.0)
            self.nodes += 1
            if self.nodes > cfg.node_budget or (
                cfg.time_budget is not None and time.monotonic() - started > cfg.time_budget
            ):
                if best_leaf is None:
                    raise SolverTimeout(f"search budget exhausted after {self.nodes - 1} nodes without a plan")
                return self._result(best_leaf, False, max(0.0, incumbent - key))
            if cfg.log_every and self.nodes % cfg.log_every == 0:
                log.info("nodes=%d incumbent=%.6f bound=%.6f", self.nodes, incumbent, key)
                if cfg.progress is not None:
                    cfg.progress(self.nodes, incumbent, key)
            for child in self._children(node):
                if child is None:
                    continue
                if child.tl is None:
                    cost = self._cost(child)
                    if cost < incumbent:
                        incumbent = self.incumbent = cost
                        best_leaf = child
                    heapq.heappush(heap, (round(cost, KEY_DIGITS), -child.depth, next(counter), child))
                    continue
                lb = self._bound(child)
                if lb is None or lb > incumbent + 10 ** -KEY_DIGITS:
                    continue
                heapq.heappush(heap, (round(lb, KEY_DIGITS), -child.depth, next(counter), child))
        raise Infeasible("no plan serves every request")

    def _result(self, leaf: _Node, optimal: bool, gap: float) -> SearchResult:
        return SearchResult(list(leaf.closed), leaf.leaf_charges, self._cost(leaf), optimal, gap, self.nodes)
