from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import RoutingProblem, Timeline


@dataclass(frozen=True)
class Action:
    """One timed action of a vehicle.

    ``kind`` is move, wait, pickup, dropoff or charge. Moves traverse the arc
    ``node -> target`` starting at ``step`` for ``duration`` steps; charges occupy
    the single step ``step``.
    """

    kind: str
    step: int
    node: int
    target: int | None = None
    duration: int = 0
    request: int | None = None
    charger: int | None = None
    km: float = 0.0
    kwh: float = 0.0


@dataclass
class RoutingSolution:
    routes: dict[int, list[Action]]  # vehicle id -> actions
    plans: dict[int, tuple]  # vehicle id -> plan items
    objective_cost: float
    distance_km: float
    total_energy_kwh: float  # energy drawn from batteries by driving
    charged_kwh: float
    charging_cost: float  # before the energy price weight
    charging_load: np.ndarray  # bus x step, kW
    per_aggregator: dict[int, tuple[float, float]]  # owner -> (cost, energy)
    optimal: bool = True
    gap: float = 0.0
    nodes: int = 0
    bus_ids: tuple = field(default=())


def _moves(problem: RoutingProblem, a: int, b: int, step: int, rate: float) -> tuple[list[Action], int]:
    out = []
    route = problem.paths.route[a][b]
    for u, v in zip(route, route[1:]):
        km, steps = problem.paths.edge(u, v)
        out.append(Action("move", step, u, v, steps, km=km, kwh=km * rate))
        step += steps
    return out, step


def build_solution(problem: RoutingProblem, timelines: list[Timeline], charges: list[np.ndarray],
                   optimal: bool = True, gap: float = 0.0, nodes: int = 0) -> RoutingSolution:
    sc = problem.scenario
    n_bus = len(problem.feeder.bus_ids)
    load = np.zeros((n_bus, problem.horizon))
    routes: dict[int, list[Action]] = {}
    plans: dict[int, tuple] = {}
    per_agg: dict[int, list[float]] = {}
    total_km = total_used = total_kwh = charge_cost = 0.0
    by_vehicle = {tl.vehicle: (tl, x) for tl, x in zip(timelines, charges)}

    for v in problem.vehicles:
        tl, x = by_vehicle.get(v.id, (None, None))
        acts: list[Action] = []
        rate = v.consumption_kwh_per_km
        km_v = kwh_cost_v = 0.0
        if tl is not None:
            slot_i = 0
            for kind, start, _, payload in tl.legs:
                if kind == "R":
                    pos, arrive, pickup, rid = payload
                    r = problem.request_by_id[rid]
                    mv, t = _moves(problem, pos, r.origin, start, rate)
                    acts += mv
                    if pickup > t:
                        acts.append(Action("wait", t, r.origin, duration=pickup - t))
                    acts.append(Action("pickup", pickup, r.origin, request=rid))
                    mv, t = _moves(problem, r.origin, r.destination, pickup, rate)
                    acts += mv
                    acts.append(Action("dropoff", t, r.destination, request=rid))
                elif kind == "C":
                    pos, arrive, cid, dwell = payload
                    c = problem.chargers[cid]
                    mv, t = _moves(problem, pos, c.transport_node, start, rate)
                    acts += mv
                    for s in range(arrive, arrive + dwell):
                        slot = tl.slots[slot_i]
                        kwh = float(x[slot_i]) if x is not None and len(x) else 0.0
                        slot_i += 1
                        acts.append(Action("charge", s, c.transport_node, charger=cid, kwh=kwh))
                        load[slot.bus_index, s] += kwh / problem.step_hours
                        kwh_cost_v += kwh * c.price(s)
                        total_kwh += kwh
                else:
                    pos, home = payload
                    mv, t = _moves(problem, pos, home, start, rate)
                    acts += mv
            km_v = tl.distance_km
            plans[v.id] = tl.items
        routes[v.id] = acts
        total_km += km_v
        total_used += km_v * rate
        charge_cost += kwh_cost_v
        cost_v = sc.distance_weight * km_v + sc.energy_price_weight * kwh_cost_v
        agg = per_agg.setdefault(v.owner, [0.0, 0.0])
        agg[0] += cost_v
        agg[1] += km_v * rate

    objective = sc.distance_weight * total_km + sc.energy_price_weight * charge_cost
    return RoutingSolution(
        routes=routes,
        plans=plans,
        objective_cost=objective,
        distance_km=total_km,
        total_energy_kwh=total_used,
        charged_kwh=total_kwh,
        charging_cost=charge_cost,
        charging_load=load,
        per_aggregator={k: (c, e) for k, (c, e) in sorted(per_agg.items())},
        optimal=optimal,
        gap=gap,
        nodes=nodes,
        bus_ids=problem.feeder.bus_ids,
    )
