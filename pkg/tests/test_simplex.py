"""Bounded-variable simplex checked against scipy.optimize.linprog."""

import numpy as np
import pytest
from scipy.optimize import linprog

from concavemin.simplex import BoundedSimplex, INFEASIBLE, OPTIMAL


def scipy_solve(A, senses, b, lo, hi, c):
    A = np.asarray(A, dtype=float)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row, s, rhs in zip(A, senses, b):
        if s == "<=":
            A_ub.append(row)
            b_ub.append(rhs)
        elif s == ">=":
            A_ub.append(-row)
            b_ub.append(-rhs)
        else:
            A_eq.append(row)
            b_eq.append(rhs)
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lo, hi)),
        method="highs",
    )
    return res


def test_toy_two_var():
    # min -x - y s.t. x + y <= 1, x, y in [0, 1]
    s = BoundedSimplex([[1.0, 1.0]], ["<="], [1.0], [0, 0], [1, 1], [-1.0, -1.0])
    res = s.solve()
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(-1.0, abs=1e-9)


def test_infeasible_zero_row():
    s = BoundedSimplex([[0.0]], ["<="], [-1.0], [0.0], [5.0], [1.0])
    assert s.solve().status == INFEASIBLE


def test_equality_rows():
    # min x + y s.t. x + y = 2, x - y = 0 -> x = y = 1
    s = BoundedSimplex([[1, 1], [1, -1]], ["=", "="], [2.0, 0.0],
                       [0, 0], [10, 10], [1.0, 1.0])
    res = s.solve()
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(2.0, abs=1e-9)
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-9)


def test_no_constraints():
    s = BoundedSimplex(np.zeros((0, 2)), [], [], [1.0, -3.0], [2.0, 4.0], [1.0, -1.0])
    res = s.solve()
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(1.0 - 4.0)


def test_random_lps_match_scipy():
    rng = np.random.default_rng(12345)
    n_checked = 0
    for trial in range(150):
        n = rng.integers(2, 9)
        m = rng.integers(1, 7)
        A = np.round(rng.uniform(-5, 5, size=(m, n)), 2)
        A[rng.uniform(size=(m, n)) < 0.3] = 0.0
        senses = [("<=", ">=", "=")[i] for i in rng.integers(0, 3, size=m)]
        lo = np.round(rng.uniform(-3, 0, size=n), 2)
        hi = lo + np.round(rng.uniform(0.0, 6, size=n), 2)
        x0 = rng.uniform(lo, hi)
        b = A @ x0 + rng.uniform(-1, 1, size=m)  # keeps a fair mix feasible
        c = np.round(rng.uniform(-4, 4, size=n), 2)

        ours = BoundedSimplex(A, senses, b, lo, hi, c).solve()
        ref = scipy_solve(A, senses, b, lo, hi, c)
        if ref.status == 2:
            assert ours.status == INFEASIBLE, f"trial {trial}: scipy infeasible, we got {ours.status}"
        elif ref.status == 0:
            assert ours.status == OPTIMAL, f"trial {trial}: scipy optimal, we got {ours.status}"
            assert ours.objective == pytest.approx(ref.fun, abs=1e-6), f"trial {trial}"
            n_checked += 1
    assert n_checked > 60


def test_duality_identity():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = rng.integers(2, 8)
        m = rng.integers(1, 6)
        A = rng.uniform(-3, 3, size=(m, n))
        senses = [("<=", ">=", "=")[i] for i in rng.integers(0, 3, size=m)]
        lo = np.zeros(n)
        hi = rng.uniform(1, 5, size=n)
        b = A @ rng.uniform(lo, hi)
        c = rng.uniform(-2, 2, size=n)
        res = BoundedSimplex(A, senses, b, lo, hi, c).solve()
        if res.status != OPTIMAL:
            continue
        # c x = y b + sum over nonbasic structurals of d_j x_j
        dual_obj = float(res.duals @ b)
        basic = set(res.basis.tolist())
        for j in range(n):
            if j not in basic:
                dual_obj += res.reduced_costs[j] * res.x[j]
        assert dual_obj == pytest.approx(res.objective, abs=1e-7 * (1 + abs(res.objective)))


def test_bound_reuse_across_solves():
    # tighten bounds, re-solve from the previous basis, then relax again
    A = [[1.0, 1.0, 1.0]]
    s = BoundedSimplex(A, ["<="], [2.5], [0, 0, 0], [1, 1, 1], [-1.0, -2.0, -3.0])
    r1 = s.solve()
    assert r1.objective == pytest.approx(-5.5)
    s.set_structural_bounds([0, 0, 0], [1, 1, 0.0])
    r2 = s.solve()
    assert r2.objective == pytest.approx(-3.0)
    s.set_structural_bounds([0, 0, 0], [1, 1, 1])
    r3 = s.solve()
    assert r3.objective == pytest.approx(-5.5)
