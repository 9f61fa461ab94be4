"""TOML scenario files.

Layout (all money in dollars, energy in kWh, distance in km, power in kW)::

    name = "case-b"

    [horizon]
    steps = 32
    step_minutes = 15

    [objective]
    energy_price_weight = 1.0
    distance_weight = 0.05
    return_to_depot = false

    [[aggregators]]          # id, depot, optional vehicle_ids / charger_ids
    [[vehicles]]             # id, owner, battery_capacity_kwh, initial_soc_kwh,
                             # consumption_kwh_per_km, seat_capacity
    [[chargers]]             # id, owner, transport_node, grid_bus, max_rate_kw,
                             # price_per_kwh (number or one value per step)
    [transport]              # symmetric = true
    [[transport.nodes]]      # id, kind, optional zone / lat / lon
    [[transport.edges]]      # source, target, distance_km, travel_minutes
    [grid]                   # slack_bus, base_kva, ev_power_factor
    [[grid.buses]]           # id, base_load_kw, base_load_kvar, v_min, v_max (pu squared)
    [[grid.lines]]           # source, target, r_pu, x_pu
    [[requests]]             # id, origin, destination, earliest_pickup_step, passengers

When an aggregator omits ``vehicle_ids`` or ``charger_ids`` they are filled from
the ``owner`` fields of the vehicles and chargers.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .scenario import (
    Aggregator,
    Bus,
    Charger,
    Edge,
    GridNetwork,
    Line,
    Node,
    Request,
    Scenario,
    TransportNetwork,
    Vehicle,
    validate_scenario,
)


def _per_step(value: Any) -> Any:
    return tuple(value) if isinstance(value, list) else value


def _plain(value: Any) -> Any:
    return list(value) if isinstance(value, tuple) else value


def scenario_from_dict(doc: dict) -> Scenario:
    vehicles = tuple(
        Vehicle(
            id=v["id"],
            owner=v["owner"],
            battery_capacity_kwh=v["battery_capacity_kwh"],
            initial_soc_kwh=v["initial_soc_kwh"],
            consumption_kwh_per_km=v["consumption_kwh_per_km"],
            seat_capacity=v.get("seat_capacity", 4),
        )
        for v in doc.get("vehicles", [])
    )
    chargers = tuple(
        Charger(
            id=c["id"],
            owner=c["owner"],
            transport_node=c["transport_node"],
            grid_bus=c["grid_bus"],
            max_rate_kw=c["max_rate_kw"],
            price_per_kwh=_per_step(c["price_per_kwh"]),
        )
        for c in doc.get("chargers", [])
    )
    aggregators = []
    for a in doc.get("aggregators", []):
        vids = a.get("vehicle_ids")
        cids = a.get("charger_ids")
        if vids is None:
            vids = [v.id for v in vehicles if v.owner == a["id"]]
        if cids is None:
            cids = [c.id for c in chargers if c.owner == a["id"]]
        aggregators.append(Aggregator(a["id"], a["depot"], tuple(vids), tuple(cids)))

    tdoc = doc.get("transport", {})
    transport = TransportNetwork(
        nodes=tuple(
            Node(n["id"], n.get("kind", "customer"), n.get("zone"), n.get("lat"), n.get("lon"))
            for n in tdoc.get("nodes", [])
        ),
        edges=tuple(
            Edge(e["source"], e["target"], e["distance_km"], e["travel_minutes"])
            for e in tdoc.get("edges", [])
        ),
        symmetric=tdoc.get("symmetric", True),
    )
    gdoc = doc.get("grid", {})
    grid = GridNetwork(
        buses=tuple(
            Bus(
                b["id"],
                _per_step(b.get("base_load_kw", 0.0)),
                _per_step(b.get("base_load_kvar", 0.0)),
                b.get("v_min", 0.9025),
                b.get("v_max", 1.1025),
            )
            for b in gdoc.get("buses", [])
        ),
        lines=tuple(Line(ln["source"], ln["target"], ln["r_pu"], ln["x_pu"]) for ln in gdoc.get("lines", [])),
        slack_bus=gdoc.get("slack_bus", 0),
        base_kva=gdoc.get("base_kva", 1000.0),
        ev_power_factor=gdoc.get("ev_power_factor", 1.0),
    )
    requests = tuple(
        Request(r["id"], r["origin"], r["destination"], r["earliest_pickup_step"], r.get("passengers", 1))
        for r in doc.get("requests", [])
    )
    horizon = doc.get("horizon", {})
    objective = doc.get("objective", {})
    return Scenario(
        aggregators=tuple(aggregators),
        vehicles=vehicles,
        chargers=chargers,
        transport=transport,
        grid=grid,
        requests=requests,
        horizon_steps=horizon.get("steps", 0),
        step_minutes=horizon.get("step_minutes", 15),
        energy_price_weight=objective.get("energy_price_weight", 1.0),
        distance_weight=objective.get("distance_weight", 0.05),
        return_to_depot=objective.get("return_to_depot", False),
        name=doc.get("name", ""),
    )


def scenario_to_dict(s: Scenario) -> dict:
    nodes = []
    for n in s.transport.nodes:
        row: dict[str, Any] = {"id": n.id, "kind": n.kind}
        for key in ("zone", "lat", "lon"):
            if getattr(n, key) is not None:
                row[key] = getattr(n, key)
        nodes.append(row)
    return {
        "name": s.name,
        "horizon": {"steps": s.horizon_steps, "step_minutes": s.step_minutes},
        "objective": {
            "energy_price_weight": s.energy_price_weight,
            "distance_weight": s.distance_weight,
            "return_to_depot": s.return_to_depot,
        },
        "aggregators": [
            {"id": a.id, "depot": a.depot, "vehicle_ids": list(a.vehicle_ids), "charger_ids": list(a.charger_ids)}
            for a in s.aggregators
        ],
        "vehicles": [
            {
                "id": v.id,
                "owner": v.owner,
                "battery_capacity_kwh": v.battery_capacity_kwh,
                "initial_soc_kwh": v.initial_soc_kwh,
                "consumption_kwh_per_km": v.consumption_kwh_per_km,
                "seat_capacity": v.seat_capacity,
            }
            for v in s.vehicles
        ],
        "chargers": [
            {
                "id": c.id,
                "owner": c.owner,
                "transport_node": c.transport_node,
                "grid_bus": c.grid_bus,
                "max_rate_kw": c.max_rate_kw,
                "price_per_kwh": _plain(c.price_per_kwh),
            }
            for c in s.chargers
        ],
        "transport": {
            "symmetric": s.transport.symmetric,
            "nodes": nodes,
            "edges": [
                {"source": e.source, "target": e.target, "distance_km": e.distance_km, "travel_minutes": e.travel_minutes}
                for e in s.transport.edges
            ],
        },
        "grid": {
            "slack_bus": s.grid.slack_bus,
            "base_kva": s.grid.base_kva,
            "ev_power_factor": s.grid.ev_power_factor,
            "buses": [
                {
                    "id": b.id,
                    "base_load_kw": _plain(b.base_load_kw),
                    "base_load_kvar": _plain(b.base_load_kvar),
                    "v_min": b.v_min,
                    "v_max": b.v_max,
                }
                for b in s.grid.buses
            ],
            "lines": [
                {"source": ln.source, "target": ln.target, "r_pu": ln.r_pu, "x_pu": ln.x_pu} for ln in s.grid.lines
            ],
        },
        "requests": [
            {
                "id": r.id,
                "origin": r.origin,
                "destination": r.destination,
                "earliest_pickup_step": r.earliest_pickup_step,
                "passengers": r.passengers,
            }
            for r in s.requests
        ],
    }


def loads_scenario(text: str, validate: bool = True) -> Scenario:
    scenario = scenario_from_dict(tomli.loads(text))
    return validate_scenario(scenario) if validate else scenario


def dumps_scenario(scenario: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(scenario))


def load_scenario(path: str | Path, validate: bool = True) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"), validate=validate)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(scenario), encoding="utf-8")
