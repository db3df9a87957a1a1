"""Independent ground-truth engines for testing and acceptance.

* brute_force_integer: full enumeration over the integer box.
* enumerate_assignments: source-per-destination maps for single-sourcing
  production-transportation instances.
* sandwich_continuous: certified [lo, hi] interval around the true optimum
  from dense secant (under-) and tangent (over-) piecewise linearizations.
* pwl_milp_encode: a direct incremental piecewise-linear MILP encoding of
  the lower-bound problem that bypasses the KKT machinery entirely.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

import numpy as np

from .functions import DomainError
from .kkt_master import MilpModel, sanitize_name
from .milp_backend import SolveParams, solve_milp
from .model import LinearExpr, Problem, eval_objective

ENUM_LIMIT = 10_000_000
_CHUNK = 200_000


@dataclass
class OracleResult:
    status: str                   # optimal | infeasible
    value: float
    argmin: list                  # optimal point(s) found
    method: str
    lo: float = math.nan          # sandwich methods only
    hi: float = math.nan

    @property
    def exact(self) -> bool:
        return self.method != "sandwich"


class OracleSizeError(ValueError):
    """The instance exceeds the enumeration size guard."""


# ---------------------------------------------------------------------------
# exhaustive integer enumeration

def brute_force_integer(problem: Problem, limit: int = ENUM_LIMIT) -> OracleResult:
    """Exact optimum of an all-integer problem by full enumeration."""
    lo = problem.lower_bounds()
    hi = problem.upper_bounds()
    if not problem.integer_mask().all():
        raise ValueError("brute force needs all-integer variables")
    lo_i = np.ceil(lo - 1e-9).astype(int)
    hi_i = np.floor(hi + 1e-9).astype(int)
    counts = np.maximum(hi_i - lo_i + 1, 0)
    total = int(np.prod(counts, dtype=np.int64)) if counts.all() else 0
    if total > limit:
        raise OracleSizeError(f"{total} points exceeds the {limit} guard")
    if total == 0:
        return OracleResult("infeasible", math.inf, [], "bruteForce")

    n = problem.n
    rows = problem.leq_rows()
    A = np.array([expr.to_dense(n) for expr, _ in rows]) if rows else np.zeros((0, n))
    rhs = np.array([r - expr.constant for expr, r in rows]) if rows else np.zeros(0)

    best_val = math.inf
    best_pts = []
    radix = np.ones(n, dtype=np.int64)
    for j in range(n - 2, -1, -1):
        radix[j] = radix[j + 1] * counts[j + 1]

    for startix in range(0, total, _CHUNK):
        ixs = np.arange(startix, min(startix + _CHUNK, total), dtype=np.int64)
        pts = lo_i[None, :] + (ixs[:, None] // radix[None, :]) % counts[None, :]
        pts = pts.astype(float)
        feas = np.ones(len(pts), dtype=bool)
        if len(rhs):
            feas = np.all(pts @ A.T <= rhs[None, :] + 1e-9, axis=1)
        for cc in problem.concave_constraints:
            tvals = np.array([cc.term.value(p) for p in pts])
            feas &= pts[:, cc.bound_var] >= tvals - 1e-9
        if not feas.any():
            continue
        cand = pts[feas]
        vals = np.full(len(cand), problem.objective_linear.constant)
        dense = problem.objective_linear.to_dense(n)
        vals += cand @ dense
        for term in problem.concave_terms:
            sub = cand[:, list(term.var_indices)]
            if term.arity == 1:
                vals += term.spec.values(sub[:, 0])
            else:
                vals += np.array([term.spec.value(s) for s in sub])
        k = int(np.argmin(vals))
        if vals[k] < best_val - 1e-12:
            best_val = float(vals[k])
            best_pts = [cand[k].copy()]
        elif abs(vals[k] - best_val) <= 1e-12:
            best_pts.append(cand[k].copy())

    if not best_pts:
        return OracleResult("infeasible", math.inf, [], "bruteForce")
    return OracleResult("optimal", best_val, best_pts, "bruteForce",
                        lo=best_val, hi=best_val)


# ---------------------------------------------------------------------------
# single-sourcing assignment enumeration

_X_RE = re.compile(r"^x_(\d+)_(\d+)$")
_Y_RE = re.compile(r"^y_(\d+)$")


def _pt_shape(problem: Problem):
    """Recover (m, n, x column map, y column map) from generator naming."""
    xcols, ycols = {}, {}
    for idx, v in enumerate(problem.variables):
        mx = _X_RE.match(v.name)
        my = _Y_RE.match(v.name)
        if mx:
            xcols[(int(mx.group(1)), int(mx.group(2)))] = idx
        elif my:
            ycols[int(my.group(1))] = idx
    if not xcols or not ycols:
        raise ValueError("not a production-transportation instance (per variable naming)")
    m = max(i for i, _ in xcols) + 1
    n = max(j for _, j in xcols) + 1
    return m, n, xcols, ycols


def enumerate_assignments(problem: Problem, limit: int = ENUM_LIMIT) -> OracleResult:
    """Exact optimum of a single-sourcing instance by assignment enumeration."""
    m, n, xcols, ycols = _pt_shape(problem)
    if m ** n > limit:
        raise OracleSizeError(f"{m}^{n} assignments exceed the {limit} guard")

    obj = dict(problem.objective_linear.terms)
    cost = np.array([[obj.get(xcols[(i, j)], 0.0) for j in range(n)] for i in range(m)])
    cap = np.array([problem.variables[ycols[i]].upper for i in range(m)])

    # demand weights sit on the x columns of the supply rows
    demand = np.zeros(n)
    for con in problem.linear_constraints:
        coefs = dict(con.expr.terms)
        touched = [key for key in xcols.items() if key[1] in coefs]
        has_y = any(ycols[i] in coefs for i in range(m))
        if has_y and touched:
            for (i, j), col in xcols.items():
                if col in coefs:
                    demand[j] = coefs[col]
            break
    if not demand.all():
        raise ValueError("could not recover demands; not a single-sourcing instance")

    terms = {t.var_indices[0]: t for t in problem.concave_terms}

    best_val = math.inf
    best_assign = None
    for assign in itertools.product(range(m), repeat=n):
        y = np.zeros(m)
        for j, i in enumerate(assign):
            y[i] += demand[j]
        if np.any(y > cap + 1e-9):
            continue
        val = problem.objective_linear.constant
        val += sum(cost[i, j] for j, i in enumerate(assign))
        for i in range(m):
            val += terms[ycols[i]].spec.value(y[i])
        if val < best_val - 1e-12:
            best_val = val
            best_assign = assign

    if best_assign is None:
        return OracleResult("infeasible", math.inf, [], "assignments")
    x = np.zeros(problem.n)
    for j, i in enumerate(best_assign):
        x[xcols[(i, j)]] = 1.0
        x[ycols[i]] += demand[j]
    return OracleResult("optimal", float(best_val), [x], "assignments",
                        lo=float(best_val), hi=float(best_val))


# ---------------------------------------------------------------------------
# incremental piecewise-linear encoding

def _add_pwl_block(model: MilpModel, xcol: int, pts: np.ndarray, vals: np.ndarray,
                   tag: str):
    """Attach delta/w columns expressing a concave PWL function of x.

    Returns the objective contribution ([(col, coef)...], constant). Binary
    fill-order rows make the encoding exact for concave minimization.
    """
    order = np.argsort(pts)
    b = pts[order]
    v = vals[order]
    keep = np.concatenate([[True], np.diff(b) > 1e-12])
    b, v = b[keep], v[keep]
    nseg = len(b) - 1
    if nseg == 0:
        model.add_constraint([(xcol, 1.0)], "=", float(b[0]))
        return [], float(v[0])

    lens = np.diff(b)
    slopes = np.diff(v) / lens
    deltas = [model.add_variable(f"d_{tag}_{i}", 0.0, float(lens[i])) for i in range(nseg)]
    ws = [model.add_variable(f"w_{tag}_{i}", 0.0, 1.0, "binary") for i in range(nseg - 1)]
    model.add_constraint([(xcol, 1.0)] + [(dc, -1.0) for dc in deltas], "=", float(b[0]))
    for i in range(nseg - 1):
        model.add_constraint([(deltas[i], 1.0), (ws[i], -float(lens[i]))], ">=", 0.0)
        model.add_constraint([(deltas[i + 1], 1.0), (ws[i], -float(lens[i + 1]))], "<=", 0.0)
    return [(deltas[i], float(slopes[i])) for i in range(nseg)], float(v[0])


def pwl_milp_encode(problem: Problem, sets: list) -> MilpModel:
    """Direct MILP whose optimum equals the inner-approximation lower bound.

    Each scalar term's breakpoint set becomes an incremental PWL block; no
    KKT variables are introduced. Original variables occupy the first
    problem.n columns.
    """
    terms = problem.all_terms()
    if len(sets) != len(terms):
        raise ValueError("need one breakpoint set per concave term")
    for term in terms:
        if term.arity != 1:
            raise ValueError("the PWL encoding supports scalar terms only")

    model = MilpModel(name=problem.name + "-pwl")
    for v in problem.variables:
        model.add_variable(sanitize_name(v.name), v.lower, v.upper, v.kind)
    for expr, rhs in problem.leq_rows():
        model.add_constraint(expr.terms, "<=", rhs - expr.constant)

    obj_terms = list(problem.objective_linear.terms)
    obj_const = problem.objective_linear.constant
    n_obj = len(problem.concave_terms)
    for t, (term, bset) in enumerate(zip(terms, sets)):
        pts = bset.points_array()[:, 0]
        vals = bset.values_array()
        contrib, const = _add_pwl_block(model, term.var_indices[0], pts, vals, f"t{t}")
        if t < n_obj:
            obj_terms.extend(contrib)
            obj_const += const
        else:
            bv = problem.concave_constraints[t - n_obj].bound_var
            model.add_constraint(contrib + [(bv, -1.0)], "<=", -const)
    model.objective = LinearExpr(tuple(obj_terms), obj_const)
    return model


# ---------------------------------------------------------------------------
# sandwich bounds for continuous instances

def _tangent_envelope(term, lo: float, hi: float, grid: int):
    """Breakpoints of min over a grid of support lines of the term.

    Support slopes come from the derivative, or from adjacent secants for
    tabulated data; singular abscissae are nudged inward, mirroring the
    Lipschitz fallback.
    """
    spec = term.spec
    xs = np.linspace(lo, hi, grid)
    slopes = np.empty(grid)
    vals = np.empty(grid)
    shift = 1e-9 * (hi - lo)
    for i, a in enumerate(xs):
        aa = a
        if spec.has_derivative() and spec.derivative_singular_at(aa):
            aa = aa + shift if aa <= lo + shift else aa - shift
        vals[i] = spec.value(aa)
        if spec.has_derivative():
            slopes[i] = spec.derivative(aa)
        else:
            left = max(lo, aa - max(shift, 1e-6 * (hi - lo)))
            right = min(hi, aa + max(shift, 1e-6 * (hi - lo)))
            slopes[i] = (spec.value(right) - spec.value(left)) / (right - left)
        xs[i] = aa

    # concavity gives nonincreasing slopes; intersections of consecutive
    # support lines are the vertices of the upper envelope
    bpts = [lo]
    bvals = [float(vals[0] + slopes[0] * (lo - xs[0]))]
    for i in range(grid - 1):
        ds = slopes[i] - slopes[i + 1]
        if ds <= 1e-12:
            continue
        xi = (vals[i + 1] - slopes[i + 1] * xs[i + 1] - vals[i] + slopes[i] * xs[i]) / ds
        xi = min(max(xi, lo), hi)
        if xi > bpts[-1] + 1e-12:
            bpts.append(float(xi))
            bvals.append(float(vals[i] + slopes[i] * (xi - xs[i])))
    if hi > bpts[-1] + 1e-12:
        bpts.append(hi)
        bvals.append(float(vals[-1] + slopes[-1] * (hi - xs[-1])))
    return np.array(bpts), np.array(bvals)


def sandwich_continuous(problem: Problem, grid_points: int = 64,
                        params: SolveParams | None = None) -> OracleResult:
    """Certified interval around the optimum from two PWL surrogates.

    lo replaces each term by its secant interpolation on a uniform grid
    (an underestimate of concave functions), hi by the pointwise minimum of
    support lines (an overestimate); each surrogate is solved exactly as a
    MILP, so lo <= optimum <= hi.
    """
    if grid_points < 2:
        raise ValueError("need at least two grid points")
    params = params or SolveParams(time_limit_sec=600.0)
    terms = problem.all_terms()
    if any(t.arity != 1 for t in terms):
        raise ValueError("sandwich supports scalar terms only")
    if problem.concave_constraints:
        raise ValueError("sandwich supports objective terms only")

    def surrogate(kind):
        model = MilpModel(name=f"{problem.name}-{kind}")
        for v in problem.variables:
            model.add_variable(sanitize_name(v.name), v.lower, v.upper, v.kind)
        for expr, rhs in problem.leq_rows():
            model.add_constraint(expr.terms, "<=", rhs - expr.constant)
        obj_terms = list(problem.objective_linear.terms)
        obj_const = problem.objective_linear.constant
        for t, term in enumerate(terms):
            lo_t, hi_t = problem.term_bounds(term)
            lo_t, hi_t = float(lo_t[0]), float(hi_t[0])
            if kind == "secant":
                pts = np.linspace(lo_t, hi_t, grid_points)
                vals = term.spec.values(pts)
            else:
                pts, vals = _tangent_envelope(term, lo_t, hi_t, grid_points)
            contrib, const = _add_pwl_block(model, term.var_indices[0], pts, vals, f"t{t}")
            obj_terms.extend(contrib)
            obj_const += const
        model.objective = LinearExpr(tuple(obj_terms), obj_const)
        return solve_milp(model, params)

    lo_sol = surrogate("secant")
    if lo_sol.status == "infeasible":
        return OracleResult("infeasible", math.inf, [], "sandwich")
    hi_sol = surrogate("tangent")
    xbest = hi_sol.x[: problem.n] if hi_sol.x is not None else lo_sol.x[: problem.n]
    return OracleResult("optimal", float(hi_sol.objective), [np.asarray(xbest)],
                        "sandwich", lo=float(lo_sol.objective),
                        hi=float(hi_sol.objective))
