"""Branch-and-bound checked against exhaustive enumeration and scipy."""

import itertools
import math

import numpy as np
import pytest

from concavemin.kkt_master import MilpModel
from concavemin.milp_backend import (BranchAndBound, SolveParams, export_lp,
                                     solve_lp, solve_milp)


def random_milp(rng):
    n = int(rng.integers(2, 9))
    m = int(rng.integers(1, 7))
    model = MilpModel(name="rand")
    for j in range(n):
        model.add_variable(f"x{j}", 0, int(rng.integers(1, 6)), "integer")
    A = np.round(rng.uniform(-4, 4, size=(m, n)), 1)
    A[rng.uniform(size=(m, n)) < 0.35] = 0.0
    x0 = np.array([rng.integers(0, int(model.variables[j].upper) + 1) for j in range(n)])
    b = A @ x0 + np.round(rng.uniform(-2, 4, size=m), 1)
    senses = [("<=", ">=")[i] for i in rng.integers(0, 2, size=m)]
    for r in range(m):
        model.add_constraint([(j, A[r, j]) for j in range(n) if A[r, j] != 0.0],
                             senses[r], b[r])
    c = np.round(rng.uniform(-5, 5, size=n), 2)
    model.objective = type(model.objective)(tuple((j, c[j]) for j in range(n)))
    return model, A, senses, b, c


def enumerate_optimum(model, A, senses, b, c):
    n = len(model.variables)
    ranges = [range(int(v.lower), int(v.upper) + 1) for v in model.variables]
    best = math.inf
    found = False
    for pt in itertools.product(*ranges):
        x = np.array(pt, dtype=float)
        lhs = A @ x
        ok = True
        for r, s in enumerate(senses):
            if s == "<=" and lhs[r] > b[r] + 1e-9:
                ok = False
                break
            if s == ">=" and lhs[r] < b[r] - 1e-9:
                ok = False
                break
        if ok:
            found = True
            best = min(best, float(c @ x))
    return best if found else None


def test_random_milps_match_enumeration():
    rng = np.random.default_rng(424242)
    solved = 0
    for trial in range(120):
        model, A, senses, b, c = random_milp(rng)
        ref = enumerate_optimum(model, A, senses, b, c)
        sol = solve_milp(model, SolveParams(time_limit_sec=60))
        if ref is None:
            assert sol.status == "infeasible", f"trial {trial}"
        else:
            assert sol.status == "optimal", f"trial {trial}: {sol.status}"
            assert sol.objective == pytest.approx(ref, abs=1e-6), f"trial {trial}"
            solved += 1
    assert solved > 60


def test_integral_lp_takes_one_node():
    model = MilpModel(name="integral")
    model.add_variable("x", 0, 4, "integer")
    model.add_variable("y", 0, 4, "integer")
    model.add_constraint([(0, 1.0), (1, 1.0)], "<=", 3.0)
    model.objective = type(model.objective)(((0, -1.0), (1, -1.0)))
    sol = solve_milp(model)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-3.0)
    assert sol.nodes_explored == 1


def test_lp_relaxation_bound():
    model = MilpModel(name="relax")
    model.add_variable("x", 0, 10, "integer")
    model.add_constraint([(0, 2.0)], "<=", 5.0)
    model.objective = type(model.objective)(((0, -1.0),))
    lp = solve_lp(model)
    milp = solve_milp(model)
    assert lp.objective == pytest.approx(-2.5)
    assert milp.objective == pytest.approx(-2.0)
    assert lp.objective <= milp.objective + 1e-9


def test_determinism():
    rng = np.random.default_rng(9)
    model, *_ = random_milp(rng)
    a = solve_milp(model, SolveParams(seed=1))
    b = solve_milp(model, SolveParams(seed=1))
    assert a.nodes_explored == b.nodes_explored
    assert a.objective == b.objective
    assert np.array_equal(a.x, b.x)


def test_export_lp_structure(tmp_path):
    model = MilpModel(name="export me!")
    model.add_variable("x 1", 1, 7, "integer")
    model.add_variable("u#0", 0, 1, "binary")
    model.add_constraint([(0, 3.0), (1, 1.0)], "<=", 9.0)
    model.objective = type(model.objective)(((0, 8.0), (1, 5.0)))
    path = tmp_path / "model.lp"
    export_lp(model, path)
    text = path.read_text()
    assert "Minimize" in text
    assert "Subject To" in text
    assert "Binaries" in text
    assert "u_0" in text
    assert text.endswith("End\n")


def test_export_lp_empty_constraints(tmp_path):
    model = MilpModel(name="empty")
    model.add_variable("x", 0, 1)
    model.objective = type(model.objective)(((0, 1.0),))
    path = tmp_path / "empty.lp"
    export_lp(model, path)
    text = path.read_text()
    assert "Subject To" in text and "End" in text


def _parse_lp(text):
    """Minimal parser for the subset this package writes."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("\\")]
    section = None
    obj, cons, bounds, generals, binaries = {}, [], {}, set(), set()

    def parse_terms(expr):
        toks = expr.replace("+", " + ").replace("-", " - ").split()
        terms, sign, coef = {}, 1.0, None
        for tok in toks:
            if tok == "+":
                sign, coef = 1.0, None
            elif tok == "-":
                sign, coef = -1.0, None
            else:
                try:
                    coef = float(tok)
                except ValueError:
                    terms[tok] = terms.get(tok, 0.0) + sign * (coef if coef is not None else 1.0)
                    sign, coef = 1.0, None
        return terms

    for ln in lines:
        word = ln.strip()
        if word in ("Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End"):
            section = word
            continue
        if section == "Minimize":
            obj = parse_terms(word.split(":", 1)[1])
        elif section == "Subject To":
            body = word.split(":", 1)[1]
            for op in ("<=", ">=", "="):
                if op in body:
                    lhs, rhs = body.rsplit(op, 1)
                    cons.append((parse_terms(lhs), op, float(rhs)))
                    break
        elif section == "Bounds":
            lo, _, name, _, hi = word.split()
            bounds[name] = (float(lo.replace("-inf", "-1e30")), float(hi.replace("+inf", "1e30")))
        elif section == "Generals":
            generals.update(word.split())
        elif section == "Binaries":
            binaries.update(word.split())
    return obj, cons, bounds, generals, binaries


def test_export_round_trip_matches_external_solver(tmp_path):
    from scipy.optimize import milp as scipy_milp
    from scipy.optimize import Bounds, LinearConstraint

    rng = np.random.default_rng(5150)
    model, A, senses, b, c = random_milp(rng)
    path = tmp_path / "round.lp"
    export_lp(model, path)
    obj, cons, bounds, generals, binaries = _parse_lp(path.read_text())

    names = [v.name for v in model.variables]
    idx = {nm: i for i, nm in enumerate(names)}
    n = len(names)
    cvec = np.zeros(n)
    for nm, coef in obj.items():
        cvec[idx[nm]] = coef
    lcs = []
    for terms, op, rhs in cons:
        row = np.zeros(n)
        for nm, coef in terms.items():
            row[idx[nm]] = coef
        if op == "<=":
            lcs.append(LinearConstraint(row, -np.inf, rhs))
        elif op == ">=":
            lcs.append(LinearConstraint(row, rhs, np.inf))
        else:
            lcs.append(LinearConstraint(row, rhs, rhs))
    lo = np.array([bounds.get(nm, (0, 1))[0] for nm in names])
    hi = np.array([bounds.get(nm, (0, 1))[1] for nm in names])
    integrality = np.array([1 if nm in generals or nm in binaries else 0 for nm in names])

    ref = scipy_milp(c=cvec, constraints=lcs, bounds=Bounds(lo, hi), integrality=integrality)
    ours = solve_milp(model)
    if ours.status == "infeasible":
        assert not ref.success
    else:
        assert ref.success
        assert ours.objective == pytest.approx(ref.fun, abs=1e-6)
