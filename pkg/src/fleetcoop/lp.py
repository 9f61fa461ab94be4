"""Dense two-phase simplex with Bland's rule.

Small problems only: the Core feasibility checks and the per-plan charging
schedules are at most a few hundred variables. Bland's rule cannot cycle, so
degenerate Core polytopes terminate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    fun: float

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run(T: np.ndarray, basis: list[int], n_cols: int, tol: float, max_iter: int) -> str:
    """Minimize the objective in the last row of ``T`` over the first ``n_cols`` columns."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        reduced = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if reduced[j] < -tol), None)
        if entering is None:
            return "optimal"
        col = T[:m, entering]
        best_ratio = math.inf
        leaving = None
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, -1] / col[i]
                if ratio < best_ratio - tol or (abs(ratio - best_ratio) <= tol and basis[i] < basis[leaving]):
                    best_ratio = ratio
                    leaving = i
        if leaving is None:
            return "unbounded"
        _pivot(T, basis, leaving, entering)
    raise RuntimeError("simplex iteration limit reached")


def _standard_form(A: np.ndarray, b: np.ndarray, c: np.ndarray, tol: float, max_iter: int):
    """Solve min c y, A y = b, y >= 0. Returns (status, y)."""
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: one artificial per row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    _run(T, basis, n + m, tol, max_iter)
    if -T[-1, -1] > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        return "infeasible", None

    # drive artificials out of the basis; rows that cannot pivot are redundant
    keep = []
    for i in range(m):
        if basis[i] >= n:
            col = next((j for j in range(n) if abs(T[i, j]) > tol), None)
            if col is None:
                continue
            _pivot(T, basis, i, col)
        keep.append(i)
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[i] for i in keep]
    T2[-1, :n] = c
    for i, j in enumerate(basis2):
        if T2[-1, j] != 0.0:
            T2[-1] -= T2[-1, j] * T2[i]
    status = _run(T2, basis2, n, tol, max_iter)
    if status != "optimal":
        return status, None
    y = np.zeros(n)
    for i, j in enumerate(basis2):
        y[j] = T2[i, -1]
    return "optimal", y


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None,
            tol: float = TOL, max_iter: int = 50_000) -> LPResult:
    """Minimize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x == b_eq`` and ``bounds``.

    ``bounds`` is a list of ``(lo, hi)`` per variable, ``None`` meaning infinite;
    omitted bounds default to ``(0, None)``.
    """
    c = np.asarray(c, dtype=float)
    nx = c.size
    A_ub = np.zeros((0, nx)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, nx)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, nx)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, nx)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if bounds is None:
        bounds = [(0.0, None)] * nx

    # x = offset + M y with y >= 0; extra rows carry finite two-sided bounds
    cols: list[tuple[int, float]] = []  # (variable, sign) per y column
    offset = np.zeros(nx)
    upper_rows: list[tuple[int, float]] = []  # (y column, width)
    for i, (lo, hi) in enumerate(bounds):
        lo = -math.inf if lo is None else float(lo)
        hi = math.inf if hi is None else float(hi)
        if lo > hi + tol:
            return LPResult("infeasible", None, math.nan)
        if math.isfinite(lo):
            offset[i] = lo
            cols.append((i, 1.0))
            if math.isfinite(hi):
                upper_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            offset[i] = hi
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    M = np.zeros((nx, len(cols)))
    for k, (i, sign) in enumerate(cols):
        M[i, k] = sign

    ny = len(cols)
    n_ub = A_ub.shape[0] + len(upper_rows)
    rows_ub = np.zeros((n_ub, ny))
    rhs_ub = np.zeros(n_ub)
    rows_ub[: A_ub.shape[0]] = A_ub @ M
    rhs_ub[: A_ub.shape[0]] = b_ub - A_ub @ offset
    for r, (k, width) in enumerate(upper_rows, start=A_ub.shape[0]):
        rows_ub[r, k] = 1.0
        rhs_ub[r] = width

    n_eq = A_eq.shape[0]
    A = np.zeros((n_ub + n_eq, ny + n_ub))
    A[:n_ub, :ny] = rows_ub
    A[:n_ub, ny:] = np.eye(n_ub)
    A[n_ub:, :ny] = A_eq @ M
    b = np.concatenate([rhs_ub, b_eq - A_eq @ offset])
    cost = np.concatenate([c @ M, np.zeros(n_ub)])

    if A.shape[0] == 0:
        if (cost < -tol).any():
            return LPResult("unbounded", None, -math.inf)
        return LPResult("optimal", offset.copy(), float(c @ offset))

    status, y = _standard_form(A, b, cost, tol, max_iter)
    if status != "optimal":
        return LPResult(status, None, math.nan if status == "infeasible" else -math.inf)
    x = offset + M @ y[:ny]
    return LPResult("optimal", x, float(c @ x))
