"""Plan model for the coupled routing / charging / grid problem.

A vehicle plan is a sequence of items:

* ``("R", request_id)``: drive to the origin, wait for the earliest pickup step,
  pick up, drive to the destination and drop off;
* ``("C", charger_id, dwell)``: drive to the charger and stay ``dwell`` whole steps,
  charging any amount up to the rate limit in each of them.

Vehicles leave every node as soon as they may, drive minimum-distance paths, serve
one request at a time, and may not end a plan on a charging stop. With
``return_to_depot`` every used vehicle finishes with a drive back to its depot.
Given the items of every vehicle the timeline is fixed, and the cheapest charging
amounts solve a small LP (state of charge, charger rate, grid voltage limits).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .. import lp
from ..grid import Feeder, solve_lindistflow
from ..scenario import Charger, Coalition, Request, Scenario, Vehicle
from .paths import ShortestPaths

Item = tuple  # ("R", rid) | ("C", cid, dwell)
LP_FEAS_TOL = 1e-9


class Infeasible(Exception):
    """No plan serves every request; ``request`` names the certificate request when known."""

    def __init__(self, message: str, request: int | None = None):
        self.request = request
        super().__init__(message)


class SolverTimeout(Exception):
    pass


@dataclass(frozen=True)
class ChargeSlot:
    vehicle: int
    charger: int
    bus_index: int
    step: int
    upper_kwh: float
    price: float


@dataclass(frozen=True)
class Timeline:
    """Fixed timing of one vehicle's items plus its energy bookkeeping."""

    vehicle: int
    items: tuple
    feasible: bool
    end_node: int
    end_step: int
    distance_km: float
    consumption_kwh: float
    # energy events in order: ("use", kwh) or ("slot", index into slots)
    events: tuple
    slots: tuple[ChargeSlot, ...]
    # (kind, from_step, to_step, payload) per item, used to expand actions
    legs: tuple = ()


class RoutingProblem:
    """Vehicles, requests and per-vehicle charger access for one solve."""

    def __init__(self, scenario: Scenario, vehicles, requests, allowed_chargers: dict[int, tuple[int, ...]],
                 coalition: Coalition | None = None, paths: ShortestPaths | None = None,
                 feeder: Feeder | None = None):
        self.scenario = scenario
        self.vehicles: tuple[Vehicle, ...] = tuple(sorted(vehicles, key=lambda v: v.id))
        self.requests: tuple[Request, ...] = tuple(sorted(requests, key=lambda r: r.id))
        self.allowed = {v.id: tuple(sorted(allowed_chargers.get(v.id, ()))) for v in self.vehicles}
        self.coalition = coalition
        self.horizon = scenario.horizon_steps
        self.step_hours = scenario.step_hours
        self.paths = paths or ShortestPaths(scenario)
        self.feeder = feeder or Feeder(scenario.grid)
        self.chargers: dict[int, Charger] = {c.id: c for c in scenario.chargers}
        self.request_by_id = {r.id: r for r in self.requests}
        self.vehicle_by_id = {v.id: v for v in self.vehicles}
        self.depot = {v.id: scenario.aggregator(v.owner).depot for v in self.vehicles}

    @classmethod
    def for_coalition(cls, scenario: Scenario, coalition: Coalition, requests=None, **kw) -> "RoutingProblem":
        """Members pool vehicles and every member's chargers."""
        vehicles = scenario.vehicles_of(coalition)
        pool = tuple(c.id for c in scenario.chargers_of(coalition))
        reqs = scenario.requests if requests is None else requests
        return cls(scenario, vehicles, reqs, {v.id: pool for v in vehicles}, coalition, **kw)

    @classmethod
    def blind(cls, scenario: Scenario, requests=None, **kw) -> "RoutingProblem":
        """Every vehicle may serve any request but charges only at its owner's chargers."""
        allowed = {v.id: tuple(c.id for c in scenario.chargers if c.owner == v.owner) for v in scenario.vehicles}
        reqs = scenario.requests if requests is None else requests
        return cls(scenario, scenario.vehicles, reqs, allowed, Coalition.grand(scenario.n_players), **kw)

    # ------------------------------------------------------------------ grid data

    @cached_property
    def base_margin(self) -> np.ndarray:
        """Squared-voltage margin above v_min per bus and step with base load only."""
        n_bus = len(self.feeder.bus_ids)
        state = solve_lindistflow(self.scenario.grid, np.zeros((n_bus, self.horizon)), self.feeder)
        self.base_state = state
        return state.voltages - self.feeder.v_min[:, None]

    @cached_property
    def headroom_kw(self) -> np.ndarray:
        """Per (bus, step): extra kW a single charger there may draw (inf if unconstrained)."""
        sens = self.feeder.ev_sensitivity
        margin = np.maximum(self.base_margin, 0.0)
        n_bus = sens.shape[0]
        out = np.full((n_bus, self.horizon), np.inf)
        for k in range(n_bus):
            active = sens[:, k] > 0
            if active.any():
                out[k] = np.min(margin[active] / sens[active, k][:, None], axis=0)
        return out

    def base_grid_violation(self) -> int | None:
        """First step where the base load alone breaks a voltage limit."""
        _ = self.base_margin
        bad = np.flatnonzero(~self.base_state.feasible)
        return int(bad[0]) if bad.size else None

    def slot_upper(self, charger: Charger, step: int) -> float:
        bus = self.feeder.index[charger.grid_bus]
        kw = min(charger.max_rate_kw, self.headroom_kw[bus, step])
        return max(0.0, kw) * self.step_hours

    # ------------------------------------------------------------------ timelines

    def timeline(self, vid: int, items: tuple, closing: bool = False) -> Timeline:
        """Timing and energy events of ``items`` for vehicle ``vid``.

        ``closing`` appends the return-to-depot drive when the scenario asks for it.
        """
        v = self.vehicle_by_id[vid]
        paths = self.paths
        pos = self.depot[vid]
        t = 0
        dist = 0.0
        used = 0.0
        events: list = []
        slots: list[ChargeSlot] = []
        legs: list = []
        feasible = True
        H = self.horizon

        def drive(a: int, b: int) -> tuple[int, float]:
            return paths.steps[a][b], paths.distance[a][b]

        for item in items:
            if item[0] == "R":
                r = self.request_by_id[item[1]]
                if r.passengers > v.seat_capacity:
                    feasible = False
                k1, d1 = drive(pos, r.origin)
                arrive = t + k1
                pickup = max(arrive, r.earliest_pickup_step)
                k2, d2 = drive(r.origin, r.destination)
                drop = pickup + k2
                legs.append(("R", t, drop, (pos, arrive, pickup, r.id)))
                dist += d1 + d2
                if d1 > 0:
                    events.append(("use", d1 * v.consumption_kwh_per_km))
                events.append(("use", d2 * v.consumption_kwh_per_km))
                used += (d1 + d2) * v.consumption_kwh_per_km
                t, pos = drop, r.destination
                if drop > H:
                    feasible = False
            else:
                _, cid, dwell = item
                c = self.chargers[cid]
                k1, d1 = drive(pos, c.transport_node)
                arrive = t + k1
                legs.append(("C", t, arrive + dwell, (pos, arrive, cid, dwell)))
                dist += d1
                if d1 > 0:
                    events.append(("use", d1 * v.consumption_kwh_per_km))
                used += d1 * v.consumption_kwh_per_km
                if arrive + dwell > H:
                    feasible = False
                else:
                    bus = self.feeder.index[c.grid_bus]
                    for s in range(arrive, arrive + dwell):
                        events.append(("slot", len(slots)))
                        slots.append(ChargeSlot(vid, cid, bus, s, self.slot_upper(c, s), c.price(s)))
                t, pos = arrive + dwell, c.transport_node
        if closing and self.scenario.return_to_depot and items:
            home = self.depot[vid]
            k1, d1 = drive(pos, home)
            legs.append(("D", t, t + k1, (pos, home)))
            dist += d1
            if d1 > 0:
                events.append(("use", d1 * v.consumption_kwh_per_km))
            used += d1 * v.consumption_kwh_per_km
            t, pos = t + k1, home
            if t > H:
                feasible = False
        return Timeline(vid, tuple(items), feasible, pos, t, dist, used, tuple(events), tuple(slots), tuple(legs))

    # ------------------------------------------------------------------ charging LP

    def solo_charging(self, tl: Timeline) -> tuple[float, list[np.ndarray]] | None:
        """Cheapest charging for one vehicle on its own, same result shape as ``charging_lp``.

        Dropping the battery capacity leaves only "enough charge before each drive",
        constraints nested in time. Covering each shortfall, in time order, from the
        cheapest earlier slot with capacity left solves that relaxation (a later shortfall
        can reach every slot an earlier one can). If the result also respects capacity it
        is optimal; otherwise this defers to the LP.
        """
        v = self.vehicle_by_id[tl.vehicle]
        x = np.zeros(len(tl.slots))
        room = [s.upper_kwh for s in tl.slots]
        seen: list[int] = []
        soc = v.initial_soc_kwh
        for kind, val in tl.events:
            if kind == "slot":
                seen.append(val)
                continue
            soc -= val
            while soc < -LP_FEAS_TOL:
                open_slots = [i for i in seen if room[i] > 0.0]
                if not open_slots:
                    return None
                i = min(open_slots, key=lambda j: (tl.slots[j].price, j))
                take = min(room[i], -soc)
                x[i] += take
                room[i] -= take
                soc += take
        soc = v.initial_soc_kwh
        for kind, val in tl.events:
            soc += x[val] if kind == "slot" else -val
            if soc > v.battery_capacity_kwh + LP_FEAS_TOL:
                return self.charging_lp([tl], coupled=False)
        cost = float(sum(s.price * x[i] for i, s in enumerate(tl.slots)))
        return cost, [x]

    def charging_lp(self, timelines: list[Timeline], coupled: bool = True) -> tuple[float, list[np.ndarray]] | None:
        """Cheapest charging for fixed timelines.

        Returns (energy cost before weighting, per-timeline kWh per slot) or None when the
        state-of-charge, rate or voltage limits cannot all be met.
        """
        n_var = sum(len(tl.slots) for tl in timelines)
        if n_var == 0:
            for tl in timelines:
                if tl.consumption_kwh > self.vehicle_by_id[tl.vehicle].initial_soc_kwh + LP_FEAS_TOL:
                    return None
            return 0.0, [np.zeros(0) for _ in timelines]

        rows: list[np.ndarray] = []
        rhs: list[float] = []
        cost = np.zeros(n_var)
        bounds = []
        offset = 0
        all_slots: list[tuple[int, ChargeSlot]] = []
        for tl in timelines:
            v = self.vehicle_by_id[tl.vehicle]
            used = 0.0
            charged = np.zeros(n_var)
            for kind, val in tl.events:
                if kind == "use":
                    used += val
                    # soc = s0 + charged - used >= 0
                    rows.append(-charged.copy())
                    rhs.append(v.initial_soc_kwh - used)
                else:
                    j = offset + val
                    charged[j] = 1.0
                    # soc after charging <= capacity
                    rows.append(charged.copy())
                    rhs.append(v.battery_capacity_kwh - v.initial_soc_kwh + used)
            for i, s in enumerate(tl.slots):
                cost[offset + i] = s.price
                bounds.append((0.0, s.upper_kwh))
                all_slots.append((offset + i, s))
            offset += len(tl.slots)

        if coupled and len(timelines) > 1:
            by_step: dict[int, list[tuple[int, ChargeSlot]]] = {}
            for j, s in all_slots:
                by_step.setdefault(s.step, []).append((j, s))
            sens = self.feeder.ev_sensitivity
            margin = self.base_margin
            for step, group in sorted(by_step.items()):
                if len({s.vehicle for _, s in group}) < 2:
                    continue
                by_charger: dict[int, list[int]] = {}
                for j, s in group:
                    by_charger.setdefault(s.charger, []).append(j)
                for cid, js in sorted(by_charger.items()):
                    if len(js) > 1:
                        row = np.zeros(n_var)
                        row[js] = 1.0
                        rows.append(row)
                        rhs.append(self.chargers[cid].max_rate_kw * self.step_hours)
                for bus_row in range(sens.shape[0]):
                    row = np.zeros(n_var)
                    for j, s in group:
                        row[j] = sens[bus_row, s.bus_index] / self.step_hours
                    if np.count_nonzero(row) > 1:
                        rows.append(row)
                        rhs.append(max(0.0, margin[bus_row, step]))

        res = lp.linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds)
        if not res.success:
            return None
        x = np.clip(res.x, 0.0, None)
        out = []
        offset = 0
        for tl in timelines:
            out.append(x[offset: offset + len(tl.slots)])
            offset += len(tl.slots)
        return float(cost @ x), out


def overlapping_charging(timelines: list[Timeline]) -> bool:
    """True when two different vehicles hold charging slots in the same step."""
    seen: dict[int, int] = {}
    for tl in timelines:
        for s in tl.slots:
            other = seen.setdefault(s.step, tl.vehicle)
            if other != tl.vehicle:
                return True
    return False
