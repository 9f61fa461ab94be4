"""Cost-sharing cooperative games: Shapley allocation and the Core.

Costs are signed dollars; negative allocations are legal and never clamped.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import lp
from .scenario import Coalition, coalition_iter

LP_TOL = 1e-9
USER_TOL = 1e-6


class IncompleteFunction(ValueError):
    def __init__(self, missing: Coalition):
        self.missing = missing
        super().__init__(f"characteristic function has no value for coalition {missing.label()}")


class InfiniteCost(ValueError):
    """A coalition could not be served; Core and Shapley are undefined."""


class DimensionTooLarge(ValueError):
    pass


class EmptyCore(ValueError):
    pass


@dataclass(frozen=True)
class CharacteristicFunction:
    """The game (N; c): cost and energy for every nonempty coalition of ``n`` players."""

    n: int
    costs: Mapping[int, float]  # keyed by coalition bitmask
    energies: Mapping[int, float] = field(default_factory=dict)

    @classmethod
    def from_costs(cls, n: int, costs: Mapping, energies: Mapping | None = None) -> "CharacteristicFunction":
        """Build from mappings keyed by Coalition, bitmask or member tuples."""
        return cls(n, {_mask(k): float(v) for k, v in costs.items()},
                   {_mask(k): float(v) for k, v in (energies or {}).items()})

    def cost(self, coalition: Coalition | int) -> float:
        mask = coalition.mask if isinstance(coalition, Coalition) else coalition
        if mask == 0:
            return 0.0
        return self.costs[mask]

    def energy(self, coalition: Coalition | int) -> float | None:
        mask = coalition.mask if isinstance(coalition, Coalition) else coalition
        return self.energies.get(mask)

    def coalitions(self) -> list[Coalition]:
        return coalition_iter(self.n)

    def check(self) -> None:
        """Raise unless the function is complete and finite."""
        for s in coalition_iter(self.n):
            if s.mask not in self.costs:
                raise IncompleteFunction(s)
            if not math.isfinite(self.costs[s.mask]):
                raise InfiniteCost(f"coalition {s.label()} has no finite cost")

    def as_array(self) -> np.ndarray:
        """Costs indexed by bitmask, with c(empty) = 0."""
        self.check()
        out = np.zeros(1 << self.n)
        for mask, v in self.costs.items():
            out[mask] = v
        return out


def _mask(key) -> int:
    if isinstance(key, Coalition):
        return key.mask
    if isinstance(key, int):
        return key
    return Coalition.of(*key).mask


@dataclass(frozen=True)
class Allocation:
    x: tuple[float, ...]
    kind: str = "user"  # shapley | core-vertex | core-witness | user

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> float:
        return self.x[i]


def shapley(c: CharacteristicFunction) -> Allocation:
    """Exact Shapley value by summing weighted marginal costs over every subset."""
    n = c.n
    values = c.as_array()
    masks = np.arange(1 << n)
    sizes = np.array([bin(m).count("1") for m in masks])
    weights = np.array([math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) if s < n else 0.0
                        for s in range(n + 1)])
    x = []
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        x.append(float(np.sum(weights[sizes[without]] * (values[without | bit] - values[without]))))
    return Allocation(tuple(x), "shapley")


def subgame(c: CharacteristicFunction, coalition: Coalition) -> CharacteristicFunction:
    """The game restricted to ``coalition``, players renumbered 1..|S| in id order."""
    members = coalition.members
    costs, energies = {}, {}
    for sub in coalition_iter(len(members)):
        mask = Coalition.of(*(members[i - 1] for i in sub.members)).mask
        costs[sub.mask] = c.cost(mask)
        if c.energy(mask) is not None:
            energies[sub.mask] = c.energy(mask)
    return CharacteristicFunction(len(members), costs, energies)


# ----------------------------------------------------------------------------- Core


def _core_constraints(c: CharacteristicFunction) -> tuple[np.ndarray, np.ndarray, list[Coalition]]:
    """Rows ``sum_{i in S} x_i <= c(S)`` for every proper nonempty S."""
    n = c.n
    coalitions = [s for s in coalition_iter(n) if s.mask != (1 << n) - 1]
    A = np.array([[1.0 if (s.mask >> i) & 1 else 0.0 for i in range(n)] for s in coalitions]).reshape(-1, n)
    b = np.array([c.cost(s) for s in coalitions])
    return A, b, coalitions


@dataclass(frozen=True)
class CoreCheck:
    feasible: bool
    witness: Allocation | None


def core_feasible(c: CharacteristicFunction) -> CoreCheck:
    """Decide non-emptiness of the Core with a phase-1 simplex; return a witness point."""
    c.check()
    n = c.n
    A, b, _ = _core_constraints(c)
    res = lp.linprog(np.zeros(n), A_ub=A if len(b) else None, b_ub=b if len(b) else None,
                     A_eq=np.ones((1, n)), b_eq=[c.cost(Coalition.grand(n))],
                     bounds=[(None, None)] * n, tol=LP_TOL)
    if not res.success:
        return CoreCheck(False, None)
    return CoreCheck(True, Allocation(tuple(float(v) for v in res.x), "core-witness"))


@dataclass(frozen=True)
class Violation:
    constraint: str  # "efficiency" or a coalition label
    slack: float  # c(S) - x(S); negative when violated. For efficiency: c(N) - x(N)


@dataclass(frozen=True)
class CoreMembership:
    inside: bool
    violations: tuple[Violation, ...]

    def __bool__(self) -> bool:
        return self.inside


def in_core(c: CharacteristicFunction, x: Allocation | Iterable[float], tol: float = USER_TOL) -> CoreMembership:
    """Check x against individual, coalitional and efficiency constraints."""
    xs = tuple(x.x if isinstance(x, Allocation) else x)
    if len(xs) != c.n:
        raise ValueError(f"allocation has {len(xs)} entries for a {c.n}-player game")
    c.check()
    violations = []
    for s in coalition_iter(c.n):
        slack = c.cost(s) - math.fsum(xs[i - 1] for i in s.members)
        if slack < -tol:
            violations.append(Violation(s.label(), slack))
    eff = c.cost(Coalition.grand(c.n)) - math.fsum(xs)
    if abs(eff) > tol:
        violations.append(Violation("efficiency", eff))
    return CoreMembership(not violations, tuple(violations))


@dataclass(frozen=True)
class CoreVertex:
    allocation: Allocation
    binding: tuple[Coalition, ...]  # proper coalitions whose constraint is tight


@dataclass(frozen=True)
class CorePolytope:
    n: int
    feasible: bool
    vertices: tuple[CoreVertex, ...]
    max_cost: tuple[float, ...]  # per player: largest x_i anywhere in the Core

    def simplex_coordinates(self, c: CharacteristicFunction) -> list[tuple[float, float, float, float, float]] | None:
        """For n = 3: barycentric savings coordinates and their 2-D triangle projection per vertex.

        Player i's coordinate is ``(c(i) - x_i) / (sum_j c(j) - c(N))``; the triangle has
        player 1 at (0, 0), player 2 at (1, 0) and player 3 at (1/2, sqrt(3)/2).
        """
        if self.n != 3:
            return None
        total = sum(c.cost(Coalition.of(i)) for i in (1, 2, 3)) - c.cost(Coalition.grand(3))
        if abs(total) <= LP_TOL:
            return None
        out = []
        for v in self.vertices:
            lam = [(c.cost(Coalition.of(i + 1)) - v.allocation[i]) / total for i in range(3)]
            out.append((lam[0], lam[1], lam[2], lam[1] + lam[2] / 2.0, lam[2] * math.sqrt(3) / 2.0))
        return out


def core_max_costs(c: CharacteristicFunction) -> tuple[float, ...]:
    """Per player, the largest Core cost share (the most it would accept and stay)."""
    n = c.n
    A, b, _ = _core_constraints(c)
    out = []
    for i in range(n):
        obj = np.zeros(n)
        obj[i] = -1.0
        res = lp.linprog(obj, A_ub=A if len(b) else None, b_ub=b if len(b) else None,
                         A_eq=np.ones((1, n)), b_eq=[c.cost(Coalition.grand(n))],
                         bounds=[(None, None)] * n, tol=LP_TOL)
        if not res.success:
            raise EmptyCore("the Core is empty")
        out.append(float(res.x[i]))
    return tuple(out)


def core_vertices(c: CharacteristicFunction, max_players: int = 4) -> CorePolytope:
    """Enumerate Core vertices by intersecting the efficiency plane with n-1 tight constraints."""
    n = c.n
    if n > max_players:
        raise DimensionTooLarge(f"vertex enumeration supports at most {max_players} players, got {n}")
    c.check()
    if not core_feasible(c).feasible:
        raise EmptyCore("the Core is empty")
    A, b, coalitions = _core_constraints(c)
    total = c.cost(Coalition.grand(n))
    found: list[np.ndarray] = []
    for rows in itertools.combinations(range(len(b)), n - 1):
        M = np.vstack([A[list(rows)], np.ones((1, n))])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, np.append(b[list(rows)], total))
        if len(b) and (A @ x - b > LP_TOL).any():
            continue
        if any(np.max(np.abs(x - y)) <= LP_TOL for y in found):
            continue
        found.append(x)
    found.sort(key=lambda v: tuple(np.round(v, 12)))
    vertices = []
    for x in found:
        binding = tuple(s for s, row, rhs in zip(coalitions, A, b) if abs(row @ x - rhs) <= LP_TOL)
        vertices.append(CoreVertex(Allocation(tuple(float(v) for v in x), "core-vertex"), binding))
    return CorePolytope(n, True, tuple(vertices), core_max_costs(c))


# ------------------------------------------------------------------- cfn text files


def parse_cfn(text: str) -> CharacteristicFunction:
    """Parse ``n=<count>`` followed by ``members=1,2 cost=<dollars> [energy=<kwh>]`` lines."""
    n = None
    costs: dict[int, float] = {}
    energies: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = dict(tok.split("=", 1) for tok in line.split())
        if n is None:
            if set(fields) != {"n"}:
                raise ValueError(f"line {lineno}: expected n=<count> first")
            n = int(fields["n"])
            coalition_iter(n)  # range check
            continue
        try:
            members = [int(m) for m in fields["members"].split(",") if m]
            mask = Coalition.of(*members).mask
            costs[mask] = float(fields["cost"])
            if "energy" in fields:
                energies[mask] = float(fields["energy"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"line {lineno}: malformed coalition line {raw!r}") from exc
        if max(members) > n:
            raise ValueError(f"line {lineno}: member outside 1..{n}")
    if n is None:
        raise ValueError("empty characteristic-function file")
    cf = CharacteristicFunction(n, costs, energies)
    for s in coalition_iter(n):
        if s.mask not in costs:
            raise IncompleteFunction(s)
    return cf


def format_cfn(c: CharacteristicFunction) -> str:
    lines = [f"n={c.n}"]
    for s in coalition_iter(c.n):
        line = f"members={','.join(str(m) for m in s.members)} cost={c.cost(s)!r}"
        e = c.energy(s)
        if e is not None:
            line += f" energy={e!r}"
        lines.append(line)
    return "\n".join(lines) + "\n"
