"""Seeded synthetic scenarios for scalability sweeps.

Layout for ``J`` transport nodes: customer nodes on a grid three columns wide,
``0.9 .. 1.3`` km between neighbours (seeded), 24 km/h travel. Aggregator ``k``
gets the ``k``-th depot in a farthest-point order over the grid, so depots spread
evenly and the aggregators of a smaller sweep cell are a subset of a larger one.
Each aggregator owns one vehicle and one charger on a dedicated charger-site node
next to its depot; charger ``k`` sits on bus ``k`` of a fixed 6-bus feeder.
Requests depend only on ``(J, seed)``, never on the aggregator count.
"""

from __future__ import annotations

import math

import numpy as np

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

MAX_AGGREGATORS = 6
COLUMNS = 3
SPEED_KMH = 24.0


def _farthest_point_order(coords: np.ndarray) -> list[int]:
    order = [0]
    dist = np.linalg.norm(coords - coords[0], axis=1)
    while len(order) < len(coords):
        nxt = int(np.argmax(dist))  # argmax takes the lowest index on ties
        order.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(coords - coords[nxt], axis=1))
    return order


def grid_scenario(n_nodes: int, n_aggregators: int, seed: int = 7, n_requests: int = 4,
                  initial_soc_kwh: float = 3.0, battery_kwh: float = 30.0,
                  consumption_kwh_per_km: float = 0.2, horizon_steps: int = 24) -> Scenario:
    if not 1 <= n_aggregators <= MAX_AGGREGATORS:
        raise ValueError(f"aggregator count must be 1..{MAX_AGGREGATORS}")
    if n_nodes < n_aggregators:
        raise ValueError("need at least as many nodes as aggregators")
    rng = np.random.default_rng([seed, n_nodes])

    coords = np.array([(i // COLUMNS, i % COLUMNS) for i in range(n_nodes)], dtype=float)
    nodes = [Node(i, "customer", lat=40.70 + 0.009 * r, lon=-74.01 + 0.012 * c) for i, (r, c) in enumerate(coords)]
    edges = []
    for i in range(n_nodes):
        for j in (i + 1, i + COLUMNS):
            if j < n_nodes and (j == i + COLUMNS or j % COLUMNS != 0):
                km = round(0.9 + 0.4 * float(rng.random()), 3)
                edges.append(Edge(i, j, km, round(km / SPEED_KMH * 60.0, 3)))

    depots = _farthest_point_order(coords)
    pairs = []
    while len(pairs) < n_requests:
        o, d = (int(x) for x in rng.choice(n_nodes, size=2, replace=False))
        pairs.append((o, d, int(rng.integers(0, 6))))

    aggregators, vehicles, chargers = [], [], []
    for k in range(1, n_aggregators + 1):
        depot = depots[(k - 1) % n_nodes]
        site = 100 + k
        nodes.append(Node(site, "charger-site"))
        edges.append(Edge(depot, site, 0.4, 1.0))
        vehicles.append(Vehicle(k, k, battery_kwh, initial_soc_kwh, consumption_kwh_per_km))
        chargers.append(Charger(k, k, site, k, 22.0, round(0.22 + 0.02 * k, 3)))
        aggregators.append(Aggregator(k, depot, (k,), (k,)))

    buses = [Bus(0)] + [Bus(b, base_load_kw=150.0, base_load_kvar=50.0) for b in range(1, MAX_AGGREGATORS + 1)]
    lines = [Line(0, 1, 0.01, 0.02), Line(1, 2, 0.01, 0.02), Line(2, 3, 0.01, 0.02),
             Line(0, 4, 0.01, 0.02), Line(4, 5, 0.01, 0.02), Line(5, 6, 0.01, 0.02)]
    scenario = Scenario(
        aggregators=tuple(aggregators),
        vehicles=tuple(vehicles),
        chargers=tuple(chargers),
        transport=TransportNetwork(tuple(nodes), tuple(edges)),
        grid=GridNetwork(tuple(buses), tuple(lines), slack_bus=0),
        requests=tuple(Request(i + 1, o, d, t) for i, (o, d, t) in enumerate(pairs)),
        horizon_steps=horizon_steps,
        step_minutes=15,
        name=f"grid-J{n_nodes}-n{n_aggregators}-seed{seed}",
    )
    return validate_scenario(scenario)


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    r = 6371.0088
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))
