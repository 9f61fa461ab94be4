"""Independent re-check of a RoutingSolution against the raw scenario data.

Nothing here reuses the planner's timelines: arcs, clocks, state of charge,
charger limits and voltages are replayed from the action lists alone.
"""

from __future__ import annotations

import numpy as np

from ..grid import solve_lindistflow
from .model import RoutingProblem
from .solution import RoutingSolution

TOL = 1e-6


def validate_solution(problem: RoutingProblem, sol: RoutingSolution) -> list[str]:
    """Every broken invariant as a message; empty when the solution is valid."""
    sc = problem.scenario
    errors: list[str] = []
    H = sc.horizon_steps
    dt = sc.step_hours
    arcs: dict[tuple[int, int], list[tuple[float, int]]] = {}
    for e in sc.transport.arcs():
        arcs.setdefault((e.source, e.target), []).append((e.distance_km, sc.travel_steps(e)))
    chargers = {c.id: c for c in sc.chargers}
    requests = {r.id: r for r in problem.requests}
    picked: dict[int, int] = {}
    dropped: dict[int, int] = {}
    per_charger_step: dict[tuple[int, int], float] = {}
    bus_pos = {b: i for i, b in enumerate(sc.grid.bus_ids)}
    load = np.zeros((len(bus_pos), H))
    total_km = 0.0
    charge_cost = 0.0
    agg_cost: dict[int, float] = {}
    agg_energy: dict[int, float] = {}

    for v in problem.vehicles:
        acts = sol.routes.get(v.id, [])
        pos = sc.aggregator(v.owner).depot
        clock = 0
        soc = v.initial_soc_kwh
        onboard: int | None = None
        km_v = cost_v = 0.0
        allowed = set(problem.allowed[v.id])
        for a in acts:
            where = f"vehicle {v.id} step {a.step} {a.kind}"
            if a.step < clock:
                errors.append(f"{where}: starts before the previous action ended ({clock})")
            if a.node != pos:
                errors.append(f"{where}: vehicle is at {pos}, not {a.node}")
            if a.kind == "move":
                options = arcs.get((a.node, a.target), [])
                if (a.km, a.duration) not in options:
                    errors.append(f"{where}: no arc {a.node}->{a.target} with {a.km} km / {a.duration} steps")
                soc -= a.km * v.consumption_kwh_per_km
                if soc < -TOL:
                    errors.append(f"{where}: state of charge {soc:.6f} below zero")
                km_v += a.km
                clock = a.step + a.duration
                pos = a.target
            elif a.kind == "wait":
                clock = a.step + a.duration
            elif a.kind == "pickup":
                r = requests.get(a.request)
                if r is None:
                    errors.append(f"{where}: unknown request {a.request}")
                    continue
                if onboard is not None:
                    errors.append(f"{where}: already carrying request {onboard}")
                if a.node != r.origin:
                    errors.append(f"{where}: pickup away from origin {r.origin}")
                if a.step < r.earliest_pickup_step:
                    errors.append(f"{where}: pickup before earliest step {r.earliest_pickup_step}")
                if r.passengers > v.seat_capacity:
                    errors.append(f"{where}: {r.passengers} passengers exceed {v.seat_capacity} seats")
                picked[r.id] = picked.get(r.id, 0) + 1
                onboard = r.id
                clock = a.step
            elif a.kind == "dropoff":
                r = requests.get(a.request)
                if r is None or onboard != a.request:
                    errors.append(f"{where}: dropping request {a.request} that is not on board")
                    continue
                if a.node != r.destination:
                    errors.append(f"{where}: dropoff away from destination {r.destination}")
                dropped[r.id] = dropped.get(r.id, 0) + 1
                onboard = None
                clock = a.step
            elif a.kind == "charge":
                c = chargers.get(a.charger)
                if c is None or c.id not in allowed:
                    errors.append(f"{where}: charger {a.charger} not usable by this vehicle")
                    continue
                if a.node != c.transport_node:
                    errors.append(f"{where}: charger {c.id} is at node {c.transport_node}")
                if onboard is not None:
                    errors.append(f"{where}: charging with a passenger on board")
                if a.kwh < -TOL or a.kwh > c.max_rate_kw * dt + TOL:
                    errors.append(f"{where}: {a.kwh} kWh outside the charger rate limit")
                soc += a.kwh
                if soc > v.battery_capacity_kwh + TOL:
                    errors.append(f"{where}: state of charge {soc:.6f} above capacity")
                key = (c.id, a.step)
                per_charger_step[key] = per_charger_step.get(key, 0.0) + a.kwh
                if 0 <= a.step < H:
                    load[bus_pos[c.grid_bus], a.step] += a.kwh / dt
                cost_v += a.kwh * c.price(a.step) * sc.energy_price_weight
                charge_cost += a.kwh * c.price(a.step)
                clock = a.step + 1
            else:
                errors.append(f"{where}: unknown action")
            if clock > H:
                errors.append(f"{where}: runs past the horizon ({clock} > {H})")
        if onboard is not None:
            errors.append(f"vehicle {v.id}: request {onboard} never dropped off")
        if sc.return_to_depot and acts and pos != sc.aggregator(v.owner).depot:
            errors.append(f"vehicle {v.id}: does not return to its depot")
        total_km += km_v
        cost_v += km_v * sc.distance_weight
        agg_cost[v.owner] = agg_cost.get(v.owner, 0.0) + cost_v
        agg_energy[v.owner] = agg_energy.get(v.owner, 0.0) + km_v * v.consumption_kwh_per_km

    for r in problem.requests:
        if picked.get(r.id, 0) != 1 or dropped.get(r.id, 0) != 1:
            errors.append(f"request {r.id}: picked up {picked.get(r.id, 0)}x, dropped {dropped.get(r.id, 0)}x")
    for (cid, step), kwh in sorted(per_charger_step.items()):
        if kwh > chargers[cid].max_rate_kw * dt + TOL:
            errors.append(f"charger {cid} step {step}: {kwh} kWh exceeds the rate limit")

    if not np.allclose(load, sol.charging_load, atol=TOL):
        errors.append("charging_load does not match the charge actions")
    state = solve_lindistflow(sc.grid, load)
    for t in np.flatnonzero(~state.feasible):
        errors.append(f"grid voltage limits violated at step {int(t)}")

    objective = sc.distance_weight * total_km + sc.energy_price_weight * charge_cost
    if abs(objective - sol.objective_cost) > TOL:
        errors.append(f"objective {sol.objective_cost} does not match recomputed {objective}")
    for owner, (cost, energy) in sol.per_aggregator.items():
        if abs(cost - agg_cost.get(owner, 0.0)) > TOL or abs(energy - agg_energy.get(owner, 0.0)) > TOL:
            errors.append(f"aggregator {owner}: attribution does not match the actions")
    return errors
