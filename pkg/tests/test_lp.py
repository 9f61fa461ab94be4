import numpy as np
import pytest
from scipy.optimize import linprog as highs

from fleetcoop.lp import linprog


@pytest.mark.parametrize("seed", range(150))
def test_matches_highs_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = int(rng.integers(1, 7)), int(rng.integers(0, 7)), int(rng.integers(0, 3))
    c = rng.normal(size=n)
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = rng.normal(size=m_ub) + 1.0
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = rng.normal(size=m_eq)
    bounds = []
    for _ in range(n):
        kind = rng.integers(0, 4)
        lo, hi = sorted(rng.uniform(-3, 3, 2))
        bounds.append([(0, None), (lo, hi), (None, hi), (lo, None)][kind])
    ref = highs(c, A_ub=A_ub if m_ub else None, b_ub=b_ub if m_ub else None,
                A_eq=A_eq if m_eq else None, b_eq=b_eq if m_eq else None, bounds=bounds, method="highs")
    got = linprog(c, A_ub if m_ub else None, b_ub if m_ub else None, A_eq if m_eq else None,
                  b_eq if m_eq else None, bounds)
    expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
    assert got.status == expected
    if expected == "optimal":
        assert got.fun == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)
        if m_ub:
            assert np.all(A_ub @ got.x <= b_ub + 1e-7)
        if m_eq:
            np.testing.assert_allclose(A_eq @ got.x, b_eq, atol=1e-7)


def test_degenerate_problem_terminates():
    # many tight constraints through the same vertex
    A = np.array([[1, 1], [1, 2], [2, 1], [1, 0], [0, 1]], dtype=float)
    b = np.array([1, 1, 1, 1, 1], dtype=float) * np.array([1, 1.5, 1.5, 1, 1])
    res = linprog([-1, -1], A, b)
    assert res.success and res.fun == pytest.approx(-1.0)


def test_infeasible_bounds():
    assert linprog([1.0], bounds=[(2, 1)]).status == "infeasible"
