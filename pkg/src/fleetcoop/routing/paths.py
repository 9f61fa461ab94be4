from __future__ import annotations

import heapq
import math

from ..scenario import Scenario


class ShortestPaths:
    """All-pairs routes on the transport graph.

    Vehicles drive the minimum-distance path (ties: fewer steps, then smaller node ids
    settle first). ``fastest`` holds the minimum travel steps over any path and is only
    used for time bounds.
    """

    def __init__(self, scenario: Scenario):
        self.node_ids = scenario.transport.node_ids
        adj: dict[int, list[tuple[int, float, int]]] = {n: [] for n in self.node_ids}
        for e in scenario.transport.arcs():
            adj[e.source].append((e.target, e.distance_km, scenario.travel_steps(e)))
        for n in adj:
            adj[n].sort()
        self._adj = adj
        self.distance: dict[int, dict[int, float]] = {}
        self.steps: dict[int, dict[int, int]] = {}
        self.route: dict[int, dict[int, tuple[int, ...]]] = {}
        self.fastest: dict[int, dict[int, int]] = {}
        for s in self.node_ids:
            self._from(s)

    def _from(self, s: int) -> None:
        best: dict[int, tuple[float, int]] = {s: (0.0, 0)}
        pred: dict[int, int | None] = {s: None}
        heap = [(0.0, 0, s)]
        done = set()
        while heap:
            d, k, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w, st in self._adj[u]:
                cand = (d + w, k + st)
                if v not in done and cand < best.get(v, (math.inf, 0)):
                    best[v] = cand
                    pred[v] = u
                    heapq.heappush(heap, (cand[0], cand[1], v))
        self.distance[s] = {v: dk[0] for v, dk in best.items()}
        self.steps[s] = {v: dk[1] for v, dk in best.items()}
        routes = {}
        for v in best:
            path = [v]
            while pred[path[-1]] is not None:
                path.append(pred[path[-1]])
            routes[v] = tuple(reversed(path))
        self.route[s] = routes

        fast = {s: 0}
        heap2 = [(0, s)]
        while heap2:
            k, u = heapq.heappop(heap2)
            if k > fast[u]:
                continue
            for v, _, st in self._adj[u]:
                if k + st < fast.get(v, math.inf):
                    fast[v] = k + st
                    heapq.heappush(heap2, (k + st, v))
        self.fastest[s] = fast

    def edge(self, u: int, v: int) -> tuple[float, int]:
        """(distance, steps) of the cheapest direct arc u -> v."""
        return min((w, st) for t, w, st in self._adj[u] if t == v)
