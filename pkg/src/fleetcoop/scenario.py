"""Domain types shared by every layer, scenario validation and coalition enumeration.

A scenario bundles the transport graph, the radial distribution grid, the fleets
and chargers of every aggregator, and the trip requests to be served. Types are
frozen dataclasses so a validated scenario can be shared freely between solves.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

MAX_PLAYERS = 16
NODE_KINDS = ("customer", "depot", "charger-site")
ZONE_LABELS = ("commercial", "industrial", "residential")

PerStep = Union[float, tuple]


def value_at(values: PerStep, step: int) -> float:
    """Read a scalar-or-per-step quantity at ``step``."""
    if isinstance(values, (tuple, list)):
        return float(values[step])
    return float(values)


class PlayerCountOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


class ScenarioError(ValueError):
    """Raised when a scenario breaks one or more invariants; carries every violation."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


# --------------------------------------------------------------------------- types


@dataclass(frozen=True, order=True)
class Coalition:
    """A set of aggregators stored as a bitmask; bit ``i - 1`` is aggregator ``i``."""

    mask: int

    @classmethod
    def of(cls, *members: int) -> "Coalition":
        mask = 0
        for m in members:
            if not 1 <= m <= MAX_PLAYERS:
                raise PlayerCountOutOfRange(f"aggregator id {m} outside 1..{MAX_PLAYERS}")
            mask |= 1 << (m - 1)
        return cls(mask)

    @classmethod
    def grand(cls, n: int) -> "Coalition":
        return cls((1 << n) - 1)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(self.mask.bit_length()) if self.mask >> i & 1)

    def __contains__(self, player: int) -> bool:
        return player >= 1 and bool(self.mask >> (player - 1) & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __or__(self, other: "Coalition") -> "Coalition":
        return Coalition(self.mask | other.mask)

    def __and__(self, other: "Coalition") -> "Coalition":
        return Coalition(self.mask & other.mask)

    def __sub__(self, other: "Coalition") -> "Coalition":
        return Coalition(self.mask & ~other.mask)

    def label(self) -> str:
        return "{" + ", ".join(str(m) for m in self.members) + "}"


def coalition_iter(n: int) -> list[Coalition]:
    """All nonempty coalitions of ``n`` players in increasing bitmask order."""
    if not 1 <= n <= MAX_PLAYERS:
        raise PlayerCountOutOfRange(f"player count must be in 1..{MAX_PLAYERS}, got {n}")
    return [Coalition(mask) for mask in range(1, 1 << n)]


@dataclass(frozen=True)
class Node:
    id: int
    kind: str = "customer"
    zone: str | None = None
    lat: float | None = None
    lon: float | None = None


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    distance_km: float
    travel_minutes: float


@dataclass(frozen=True)
class TransportNetwork:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    symmetric: bool = True

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes)

    def node(self, node_id: int) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def arcs(self) -> list[Edge]:
        """Directed arcs; symmetric networks contribute both directions of each edge."""
        out = list(self.edges)
        if self.symmetric:
            out += [Edge(e.target, e.source, e.distance_km, e.travel_minutes) for e in self.edges]
        return out


@dataclass(frozen=True)
class Bus:
    id: int
    base_load_kw: PerStep = 0.0
    base_load_kvar: PerStep = 0.0
    v_min: float = 0.9025
    v_max: float = 1.1025


@dataclass(frozen=True)
class Line:
    source: int
    target: int
    r_pu: float
    x_pu: float


@dataclass(frozen=True)
class GridNetwork:
    """Radial feeder. Voltages are squared per-unit; powers are converted to
    per-unit with ``base_kva``. EV chargers draw reactive power at ``ev_power_factor``."""

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    slack_bus: int
    base_kva: float = 1000.0
    ev_power_factor: float = 1.0

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)


@dataclass(frozen=True)
class Aggregator:
    id: int
    depot: int
    vehicle_ids: tuple[int, ...] = ()
    charger_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class Vehicle:
    id: int
    owner: int
    battery_capacity_kwh: float
    initial_soc_kwh: float
    consumption_kwh_per_km: float
    seat_capacity: int = 4


@dataclass(frozen=True)
class Charger:
    id: int
    owner: int
    transport_node: int
    grid_bus: int
    max_rate_kw: float
    price_per_kwh: PerStep

    def price(self, step: int) -> float:
        return value_at(self.price_per_kwh, step)


@dataclass(frozen=True)
class Request:
    id: int
    origin: int
    destination: int
    earliest_pickup_step: int
    passengers: int = 1


@dataclass(frozen=True)
class Scenario:
    aggregators: tuple[Aggregator, ...]
    vehicles: tuple[Vehicle, ...]
    chargers: tuple[Charger, ...]
    transport: TransportNetwork
    grid: GridNetwork
    requests: tuple[Request, ...]
    horizon_steps: int
    step_minutes: int = 15
    energy_price_weight: float = 1.0
    distance_weight: float = 0.05
    return_to_depot: bool = False
    name: str = ""

    @property
    def n_players(self) -> int:
        return len(self.aggregators)

    @property
    def step_hours(self) -> float:
        return self.step_minutes / 60.0

    def travel_steps(self, edge: Edge) -> int:
        return max(1, math.ceil(edge.travel_minutes / self.step_minutes - 1e-12))

    def aggregator(self, agg_id: int) -> Aggregator:
        for a in self.aggregators:
            if a.id == agg_id:
                return a
        raise KeyError(agg_id)

    def vehicle(self, vid: int) -> Vehicle:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def charger(self, cid: int) -> Charger:
        for c in self.chargers:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def request(self, rid: int) -> Request:
        for r in self.requests:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def vehicles_of(self, coalition: Coalition) -> tuple[Vehicle, ...]:
        return tuple(v for v in self.vehicles if v.owner in coalition)

    def chargers_of(self, coalition: Coalition) -> tuple[Charger, ...]:
        return tuple(c for c in self.chargers if c.owner in coalition)


# ---------------------------------------------------------------------- validation


def _steps_diameter(scenario: Scenario) -> int | None:
    """Largest shortest travel time in steps between any two nodes; None if disconnected."""
    ids = scenario.transport.node_ids
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in ids}
    for e in scenario.transport.arcs():
        if e.source in adj and e.target in adj:
            adj[e.source].append((e.target, scenario.travel_steps(e)))
    diameter = 0
    for s in ids:
        best = {s: 0}
        heap = [(0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > best[u]:
                continue
            for v, w in adj[u]:
                if d + w < best.get(v, math.inf):
                    best[v] = d + w
                    heapq.heappush(heap, (d + w, v))
        if len(best) < len(ids):
            return None
        diameter = max(diameter, max(best.values()))
    return diameter


def _grid_is_tree(grid: GridNetwork) -> bool:
    ids = set(grid.bus_ids)
    if len(grid.lines) != len(ids) - 1:
        return False
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for ln in grid.lines:
        if ln.source not in ids or ln.target not in ids:
            return False
        adj[ln.source].append(ln.target)
        adj[ln.target].append(ln.source)
    seen = {grid.slack_bus}
    stack = [grid.slack_bus]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen == ids


def _duplicates(ids: Sequence[int]) -> set[int]:
    seen: set[int] = set()
    dup = set()
    for i in ids:
        if i in seen:
            dup.add(i)
        seen.add(i)
    return dup


def diagnose(scenario: Scenario) -> list[Diagnostic]:
    """Every invariant violation in ``scenario``, in a stable order."""
    out: list[Diagnostic] = []

    def bad(code: str, path: str, msg: str) -> None:
        out.append(Diagnostic(code, path, msg))

    node_ids = set(scenario.transport.node_ids)
    bus_ids = set(scenario.grid.bus_ids)
    agg_ids = [a.id for a in scenario.aggregators]
    horizon = scenario.horizon_steps

    for name, ids in (
        ("aggregators", agg_ids),
        ("vehicles", [v.id for v in scenario.vehicles]),
        ("chargers", [c.id for c in scenario.chargers]),
        ("requests", [r.id for r in scenario.requests]),
        ("transport.nodes", list(scenario.transport.node_ids)),
        ("grid.buses", list(scenario.grid.bus_ids)),
    ):
        for d in sorted(_duplicates(ids)):
            bad("DuplicateId", f"{name}[{d}]", f"id {d} appears more than once")

    if not scenario.aggregators:
        bad("EmptyFleet", "aggregators", "scenario has no aggregators")
    elif sorted(agg_ids) != list(range(1, len(agg_ids) + 1)):
        bad("InvalidValue", "aggregators", f"aggregator ids must be 1..{len(agg_ids)}, got {sorted(agg_ids)}")
    if len(agg_ids) > MAX_PLAYERS:
        bad("InvalidValue", "aggregators", f"at most {MAX_PLAYERS} aggregators are supported")
    if horizon < 1:
        bad("InvalidValue", "horizon.steps", "horizon must be at least one step")
    if scenario.step_minutes <= 0:
        bad("InvalidValue", "horizon.step_minutes", "step length must be positive")

    vehicle_by_id = {v.id: v for v in scenario.vehicles}
    charger_by_id = {c.id: c for c in scenario.chargers}
    for a in scenario.aggregators:
        p = f"aggregators[{a.id}]"
        if a.depot not in node_ids:
            bad("DanglingReference", p + ".depot", f"aggregator {a.id} depot node {a.depot} does not exist")
        if not a.vehicle_ids:
            bad("EmptyFleet", p, f"aggregator {a.id} owns no vehicles")
        if not a.charger_ids:
            bad("MissingCharger", p, f"aggregator {a.id} owns no charger")
        for vid in a.vehicle_ids:
            v = vehicle_by_id.get(vid)
            if v is None:
                bad("DanglingReference", p + ".vehicle_ids", f"aggregator {a.id} lists missing vehicle {vid}")
            elif v.owner != a.id:
                bad("OwnershipMismatch", p + ".vehicle_ids", f"vehicle {vid} is owned by {v.owner}, not {a.id}")
        for cid in a.charger_ids:
            c = charger_by_id.get(cid)
            if c is None:
                bad("DanglingReference", p + ".charger_ids", f"aggregator {a.id} lists missing charger {cid}")
            elif c.owner != a.id:
                bad("OwnershipMismatch", p + ".charger_ids", f"charger {cid} is owned by {c.owner}, not {a.id}")
    listed = [vid for a in scenario.aggregators for vid in a.vehicle_ids]
    for vid in sorted(_duplicates(listed)):
        bad("OverlappingFleet", "aggregators", f"vehicle {vid} belongs to more than one aggregator")

    for v in scenario.vehicles:
        p = f"vehicles[{v.id}]"
        if v.owner not in agg_ids:
            bad("DanglingReference", p + ".owner", f"vehicle {v.id} owner {v.owner} does not exist")
        elif v.id not in scenario.aggregator(v.owner).vehicle_ids:
            bad("OwnershipMismatch", p + ".owner", f"vehicle {v.id} missing from aggregator {v.owner} fleet")
        if not 0 <= v.initial_soc_kwh <= v.battery_capacity_kwh:
            bad("InvalidValue", p + ".initial_soc_kwh", f"vehicle {v.id} initial SoC outside [0, capacity]")
        if v.consumption_kwh_per_km <= 0:
            bad("InvalidValue", p + ".consumption_kwh_per_km", f"vehicle {v.id} consumption must be positive")
        if v.seat_capacity < 1:
            bad("InvalidValue", p + ".seat_capacity", f"vehicle {v.id} needs at least one seat")

    for c in scenario.chargers:
        p = f"chargers[{c.id}]"
        if c.owner not in agg_ids:
            bad("DanglingReference", p + ".owner", f"charger {c.id} owner {c.owner} does not exist")
        elif c.id not in scenario.aggregator(c.owner).charger_ids:
            bad("OwnershipMismatch", p + ".owner", f"charger {c.id} missing from aggregator {c.owner} list")
        if c.transport_node not in node_ids:
            bad("DanglingReference", p + ".transport_node",
                f"charger {c.id} references missing transport node {c.transport_node}")
        if c.grid_bus not in bus_ids:
            bad("DanglingReference", p + ".grid_bus", f"charger {c.id} references missing grid bus {c.grid_bus}")
        if c.max_rate_kw <= 0:
            bad("InvalidValue", p + ".max_rate_kw", f"charger {c.id} max rate must be positive")
        _check_per_step(c.price_per_kwh, horizon, p + ".price_per_kwh", bad)

    for r in scenario.requests:
        p = f"requests[{r.id}]"
        if r.origin == r.destination:
            bad("InvalidRequest", p, f"request {r.id} has origin equal to destination")
        for attr in ("origin", "destination"):
            if getattr(r, attr) not in node_ids:
                bad("DanglingReference", f"{p}.{attr}", f"request {r.id} {attr} node {getattr(r, attr)} does not exist")
        if not 0 <= r.earliest_pickup_step < max(horizon, 1):
            bad("InvalidRequest", p + ".earliest_pickup_step", f"request {r.id} pickup step outside horizon")
        if r.passengers < 1:
            bad("InvalidRequest", p + ".passengers", f"request {r.id} needs at least one passenger")

    for i, e in enumerate(scenario.transport.edges):
        p = f"transport.edges[{i}]"
        for end in (e.source, e.target):
            if end not in node_ids:
                bad("DanglingReference", p, f"edge references missing node {end}")
        if e.distance_km <= 0:
            bad("InvalidValue", p + ".distance_km", "edge distance must be positive")
        if e.travel_minutes <= 0:
            bad("InvalidValue", p + ".travel_minutes", "edge travel time must be positive")
    for n in scenario.transport.nodes:
        if n.kind not in NODE_KINDS:
            bad("InvalidValue", f"transport.nodes[{n.id}].kind", f"unknown node kind {n.kind!r}")
        if n.zone is not None and n.zone not in ZONE_LABELS:
            bad("InvalidValue", f"transport.nodes[{n.id}].zone", f"unknown zone label {n.zone!r}")

    grid = scenario.grid
    if grid.slack_bus not in bus_ids:
        bad("DanglingReference", "grid.slack_bus", f"slack bus {grid.slack_bus} does not exist")
    elif not _grid_is_tree(grid):
        bad("NotRadial", "grid.lines", "grid lines do not form a tree rooted at the slack bus")
    for ln in grid.lines:
        if ln.r_pu < 0 or ln.x_pu < 0:
            bad("InvalidValue", f"grid.lines[{ln.source}-{ln.target}]", "line impedance must be nonnegative")
    for b in grid.buses:
        p = f"grid.buses[{b.id}]"
        if not b.v_min < b.v_max:
            bad("InvalidValue", p, f"bus {b.id} needs v_min < v_max")
        _check_per_step(b.base_load_kw, horizon, p + ".base_load_kw", bad)
        _check_per_step(b.base_load_kvar, horizon, p + ".base_load_kvar", bad)
    if not 0 < grid.ev_power_factor <= 1:
        bad("InvalidValue", "grid.ev_power_factor", "power factor must be in (0, 1]")
    if grid.base_kva <= 0:
        bad("InvalidValue", "grid.base_kva", "base power must be positive")

    edges_ok = not any(d.path.startswith("transport.edges") for d in out)
    if scenario.transport.nodes and edges_ok:
        diameter = _steps_diameter(scenario)
        if diameter is None:
            bad("DisconnectedGraph", "transport", "transport graph is not connected")
        elif scenario.requests:
            latest = max(r.earliest_pickup_step for r in scenario.requests)
            if horizon < latest + diameter:
                bad("HorizonTooShort", "horizon.steps",
                    f"horizon {horizon} < latest pickup {latest} + diameter {diameter} steps")
    return out


def _check_per_step(values: PerStep, horizon: int, path: str, bad) -> None:
    if isinstance(values, (tuple, list)):
        if len(values) != horizon:
            bad("DimensionMismatch", path, f"expected {horizon} per-step values, got {len(values)}")
        vals = values
    else:
        vals = [values]
    if any(float(v) < 0 for v in vals):
        bad("InvalidValue", path, "values must be nonnegative")


def validate_scenario(raw: Scenario) -> Scenario:
    """Return ``raw`` unchanged when every invariant holds, else raise ScenarioError."""
    diagnostics = diagnose(raw)
    if diagnostics:
        raise ScenarioError(diagnostics)
    return raw


__all__ = [
    "Aggregator", "Bus", "Charger", "Coalition", "Diagnostic", "Edge", "GridNetwork", "Line",
    "MAX_PLAYERS", "Node", "PlayerCountOutOfRange", "Request", "Scenario", "ScenarioError",
    "TransportNetwork", "Vehicle", "coalition_iter", "diagnose", "validate_scenario", "value_at",
]
