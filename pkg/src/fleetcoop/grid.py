"""Linearized DistFlow on a radial feeder.

Flows are lossless subtree sums and squared voltages drop along each line by
``2 (r P + x Q)`` in per-unit, so every bus voltage is affine in the nodal loads.
That affinity is what makes the charging headroom below exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .scenario import GridNetwork, value_at

NO_GRID_LIMIT = math.inf
VOLTAGE_TOL = 1e-9


class NotRadial(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class InfeasibleBase(ValueError):
    pass


class Feeder:
    """Topology of a radial grid compiled into arrays (buses in ``grid.buses`` order)."""

    def __init__(self, grid: GridNetwork):
        self.grid = grid
        self.bus_ids = grid.bus_ids
        self.index = {b: i for i, b in enumerate(self.bus_ids)}
        n = len(self.bus_ids)
        if grid.slack_bus not in self.index or len(grid.lines) != n - 1:
            raise NotRadial("grid lines must form a spanning tree rooted at the slack bus")
        adj: dict[int, list[tuple[int, float, float]]] = {i: [] for i in range(n)}
        for ln in grid.lines:
            if ln.source not in self.index or ln.target not in self.index:
                raise NotRadial(f"line {ln.source}-{ln.target} references an unknown bus")
            a, b = self.index[ln.source], self.index[ln.target]
            adj[a].append((b, ln.r_pu, ln.x_pu))
            adj[b].append((a, ln.r_pu, ln.x_pu))

        root = self.index[grid.slack_bus]
        self.root = root
        self.parent = np.full(n, -1)
        self.r = np.zeros(n)  # impedance of the line feeding each bus
        self.x = np.zeros(n)
        order = [root]
        seen = {root}
        for u in order:
            for v, r, x in adj[u]:
                if v in seen:
                    continue
                seen.add(v)
                self.parent[v] = u
                self.r[v] = r
                self.x[v] = x
                order.append(v)
        if len(order) != n:
            raise NotRadial("grid lines do not connect every bus to the slack bus")
        self.order = order
        # lines are reported parent -> child, indexed by the child in BFS order
        self.line_children = order[1:]

        self.v_min = np.array([b.v_min for b in grid.buses])
        self.v_max = np.array([b.v_max for b in grid.buses])
        pf = grid.ev_power_factor
        self.ev_q_ratio = math.sqrt(max(0.0, 1.0 - pf * pf)) / pf

    @property
    def line_ids(self) -> list[tuple[int, int]]:
        return [(self.bus_ids[self.parent[c]], self.bus_ids[c]) for c in self.line_children]

    @cached_property
    def path_r(self) -> np.ndarray:
        """``path_r[j, k]``: total resistance shared by the slack-to-j and slack-to-k paths."""
        return self._common_path(self.r)

    @cached_property
    def path_x(self) -> np.ndarray:
        return self._common_path(self.x)

    def _common_path(self, z: np.ndarray) -> np.ndarray:
        n = len(self.bus_ids)
        ancestors: list[set[int]] = [set() for _ in range(n)]
        for v in self.order[1:]:
            ancestors[v] = ancestors[self.parent[v]] | {v}
        out = np.zeros((n, n))
        for j in range(n):
            for k in range(n):
                out[j, k] = sum(z[m] for m in ancestors[j] & ancestors[k])
        return out

    @cached_property
    def ev_sensitivity(self) -> np.ndarray:
        """Drop in squared voltage at bus j per kW of EV charging at bus k."""
        return 2.0 * (self.path_r + self.path_x * self.ev_q_ratio) / self.grid.base_kva

    def base_loads(self, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
        p = np.array([[value_at(b.base_load_kw, t) for t in range(n_steps)] for b in self.grid.buses])
        q = np.array([[value_at(b.base_load_kvar, t) for t in range(n_steps)] for b in self.grid.buses])
        return p.reshape(len(self.bus_ids), n_steps), q.reshape(len(self.bus_ids), n_steps)


@dataclass(frozen=True)
class GridState:
    bus_ids: tuple[int, ...]
    line_ids: tuple[tuple[int, int], ...]
    voltages: np.ndarray  # bus x step, pu squared
    p_kw: np.ndarray  # line x step, parent -> child
    q_kvar: np.ndarray
    feasible: np.ndarray  # per step

    @property
    def all_feasible(self) -> bool:
        return bool(self.feasible.all())

    def voltage(self, bus: int, step: int) -> float:
        return float(self.voltages[self.bus_ids.index(bus), step])

    def table(self) -> list[tuple[int, int, float, bool]]:
        """Rows of (step, bus, v_pu2, step_feasible)."""
        rows = []
        for t in range(self.voltages.shape[1]):
            for i, b in enumerate(self.bus_ids):
                rows.append((t, b, float(self.voltages[i, t]), bool(self.feasible[t])))
        return rows


def solve_lindistflow(grid: GridNetwork, extra_load_kw, feeder: Feeder | None = None) -> GridState:
    """Evaluate LinDistFlow for base load plus ``extra_load_kw`` (buses x steps, kW).

    The extra load is EV charging and draws reactive power at the grid's EV power factor.
    """
    feeder = feeder or Feeder(grid)
    extra = np.asarray(extra_load_kw, dtype=float)
    if extra.ndim != 2 or extra.shape[0] != len(feeder.bus_ids):
        raise DimensionMismatch(f"extra load must be {len(feeder.bus_ids)} x steps, got {extra.shape}")
    if (extra < 0).any():
        raise ValueError("extra load must be nonnegative")
    n_steps = extra.shape[1]
    base_p, base_q = feeder.base_loads(n_steps)
    p = base_p + extra
    q = base_q + extra * feeder.ev_q_ratio

    # subtree sums, leaves first
    flow_p = p.copy()
    flow_q = q.copy()
    for v in reversed(feeder.order[1:]):
        u = feeder.parent[v]
        flow_p[u] += flow_p[v]
        flow_q[u] += flow_q[v]

    base = grid.base_kva
    v2 = np.empty_like(p)
    v2[feeder.root] = 1.0
    for v in feeder.order[1:]:
        u = feeder.parent[v]
        v2[v] = v2[u] - 2.0 * (feeder.r[v] * flow_p[v] + feeder.x[v] * flow_q[v]) / base

    ok = (v2 >= feeder.v_min[:, None] - VOLTAGE_TOL) & (v2 <= feeder.v_max[:, None] + VOLTAGE_TOL)
    children = feeder.line_children
    return GridState(
        bus_ids=feeder.bus_ids,
        line_ids=tuple(feeder.line_ids),
        voltages=v2,
        p_kw=flow_p[children],
        q_kvar=flow_q[children],
        feasible=ok.all(axis=0),
    )


def max_charging_headroom(grid: GridNetwork, base_extra_load, bus: int, step: int,
                          feeder: Feeder | None = None) -> float:
    """Largest extra EV power (kW) at ``bus`` and ``step`` keeping every voltage above its minimum.

    Returns ``NO_GRID_LIMIT`` when charging at ``bus`` does not move any voltage.
    """
    feeder = feeder or Feeder(grid)
    state = solve_lindistflow(grid, base_extra_load, feeder)
    if not state.feasible[step]:
        raise InfeasibleBase(f"base case violates voltage limits at step {step}")
    k = feeder.index[bus]
    sens = feeder.ev_sensitivity[:, k]
    margin = state.voltages[:, step] - feeder.v_min
    active = sens > 0
    if not active.any():
        return NO_GRID_LIMIT
    return float(np.min(np.maximum(margin[active], 0.0) / sens[active]))
