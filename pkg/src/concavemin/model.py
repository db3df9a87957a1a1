"""Problem data model: variables, linear parts, concave terms, JSON format.

A Problem is a box-constrained program

    min  f(x) + sum_t phi_t(x[t])
    s.t. linear constraints, optional rows  x_v >= phi(x[t]),
         bounds and integrality on x

with f linear and each phi_t concave on its variables' box.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .functions import ConcaveFunctionSpec, DomainError, spec_from_dict

VARIABLE_KINDS = ("continuous", "integer", "binary")
SENSES = ("<=", ">=", "=")
INTEGRALITY_TOL = 1e-6


class ProblemFormatError(ValueError):
    """Malformed problem JSON."""


class ProblemValidationError(ValueError):
    """A problem failed validation; diagnostics carried on the exception."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float
    upper: float
    kind: str = "continuous"

    def __post_init__(self):
        if self.kind not in VARIABLE_KINDS:
            raise ValueError(f"unknown variable kind: {self.kind}")


@dataclass(frozen=True)
class LinearExpr:
    """Sparse linear expression sum(coef * x[idx]) + constant."""

    terms: tuple = ()
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((int(i), float(c)) for i, c in self.terms))

    def value(self, x) -> float:
        return self.constant + sum(c * x[i] for i, c in self.terms)

    def to_dense(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        for i, c in self.terms:
            row[i] += c
        return row


@dataclass(frozen=True)
class ConcaveTerm:
    """A concave summand phi(x[i1], ..., x[ik]) of the objective."""

    var_indices: tuple
    spec: ConcaveFunctionSpec

    def __post_init__(self):
        object.__setattr__(self, "var_indices", tuple(int(i) for i in self.var_indices))

    @property
    def arity(self) -> int:
        return len(self.var_indices)

    def value(self, x) -> float:
        sub = [x[i] for i in self.var_indices]
        return self.spec.value(sub[0] if len(sub) == 1 else np.asarray(sub))


@dataclass(frozen=True)
class ConcaveConstraint:
    """Row  x[bound_var] >= phi(x[term vars])."""

    bound_var: int
    term: ConcaveTerm


@dataclass(frozen=True)
class LinearConstraint:
    expr: LinearExpr
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown constraint sense: {self.sense}")


@dataclass(frozen=True)
class Problem:
    name: str
    variables: tuple
    objective_linear: LinearExpr
    concave_terms: tuple = ()
    linear_constraints: tuple = ()
    concave_constraints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "concave_terms", tuple(self.concave_terms))
        object.__setattr__(self, "linear_constraints", tuple(self.linear_constraints))
        object.__setattr__(self, "concave_constraints", tuple(self.concave_constraints))

    @property
    def n(self) -> int:
        return len(self.variables)

    def lower_bounds(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    def integer_mask(self) -> np.ndarray:
        return np.array([v.kind in ("integer", "binary") for v in self.variables])

    def term_bounds(self, term: ConcaveTerm):
        lo = np.array([self.variables[i].lower for i in term.var_indices], dtype=float)
        hi = np.array([self.variables[i].upper for i in term.var_indices], dtype=float)
        return lo, hi

    def all_terms(self):
        """Objective terms followed by concave-constraint terms."""
        return list(self.concave_terms) + [cc.term for cc in self.concave_constraints]

    def leq_rows(self):
        """Linear constraints normalized to <= rows (equalities become pairs)."""
        rows = []
        for con in self.linear_constraints:
            if con.sense == "<=":
                rows.append((con.expr, con.rhs))
            elif con.sense == ">=":
                neg = LinearExpr(tuple((i, -c) for i, c in con.expr.terms), -con.expr.constant)
                rows.append((neg, -con.rhs))
            else:
                neg = LinearExpr(tuple((i, -c) for i, c in con.expr.terms), -con.expr.constant)
                rows.append((con.expr, con.rhs))
                rows.append((neg, -con.rhs))
        return rows


# ---------------------------------------------------------------------------
# validation

def _expr_diagnostics(expr: LinearExpr, n: int, where: str):
    out = []
    seen = set()
    for i, _ in expr.terms:
        if not (0 <= i < n):
            out.append(f"{where}: variable index {i} out of range")
        elif i in seen:
            out.append(f"{where}: duplicate variable index {i}")
        seen.add(i)
    return out


def validate(problem: Problem) -> list:
    """All invariant violations as human-readable diagnostics (empty = valid)."""
    diags = []
    n = problem.n
    for v in problem.variables:
        if v.lower > v.upper:
            diags.append(f"variable {v.name}: inverted bounds [{v.lower}, {v.upper}]")
        if v.kind == "binary" and (v.lower != 0.0 or v.upper != 1.0):
            diags.append(f"variable {v.name}: binary bounds must be [0, 1]")
        if not (math.isfinite(v.lower) and math.isfinite(v.upper)):
            diags.append(f"variable {v.name}: non-finite bounds")

    diags.extend(_expr_diagnostics(problem.objective_linear, n, "objective"))
    for r, con in enumerate(problem.linear_constraints):
        diags.extend(_expr_diagnostics(con.expr, n, f"constraint {r}"))

    if not problem.concave_terms and not problem.concave_constraints:
        diags.append("no concave term or concave constraint present")

    def check_term(term: ConcaveTerm, where: str):
        for i in term.var_indices:
            if not (0 <= i < n):
                diags.append(f"{where}: variable index {i} out of range")
                return
        if len(set(term.var_indices)) != len(term.var_indices):
            diags.append(f"{where}: repeated variable index")
            return
        lo, hi = problem.term_bounds(term)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            diags.append(f"{where}: concave-term variable without finite bounds")
            return
        if np.any(lo > hi):
            return  # inverted bounds reported above
        if term.spec.arity != term.arity:
            diags.append(f"{where}: spec arity {term.spec.arity} != term arity {term.arity}")
            return
        reason = term.spec.domain_ok(lo, hi)
        if reason is not None:
            diags.append(f"{where}: {reason}")
            return
        if not term.spec.sampled_concavity_ok(lo, hi):
            diags.append(f"{where}: sampled concavity check failed")

    for t, term in enumerate(problem.concave_terms):
        check_term(term, f"concave term {t}")
    for t, cc in enumerate(problem.concave_constraints):
        where = f"concave constraint {t}"
        if not (0 <= cc.bound_var < n):
            diags.append(f"{where}: bound variable index out of range")
        elif cc.bound_var in cc.term.var_indices:
            diags.append(f"{where}: bound variable appears in the concave term")
        check_term(cc.term, where)
    return diags


def eval_objective(problem: Problem, x, check: bool = True) -> float:
    """f(x) plus all concave objective terms at x."""
    x = np.asarray(x, dtype=float)
    if check:
        lo, hi = problem.lower_bounds(), problem.upper_bounds()
        if np.any(x < lo - 1e-7) or np.any(x > hi + 1e-7):
            raise DomainError("point outside variable bounds")
        ints = problem.integer_mask()
        if ints.any() and np.max(np.abs(x[ints] - np.round(x[ints]))) > INTEGRALITY_TOL:
            raise DomainError("point violates integrality")
    total = problem.objective_linear.value(x)
    for term in problem.concave_terms:
        total += term.value(x)
    return float(total)


def point_feasible(problem: Problem, x, row_tol: float = 1e-7) -> bool:
    """Feasibility of x for bounds, integrality, and all constraints."""
    x = np.asarray(x, dtype=float)
    lo, hi = problem.lower_bounds(), problem.upper_bounds()
    if np.any(x < lo - row_tol) or np.any(x > hi + row_tol):
        return False
    ints = problem.integer_mask()
    if ints.any() and np.max(np.abs(x[ints] - np.round(x[ints]))) > INTEGRALITY_TOL:
        return False
    for expr, rhs in problem.leq_rows():
        if expr.value(x) > rhs + row_tol:
            return False
    for cc in problem.concave_constraints:
        if x[cc.bound_var] < cc.term.value(x) - row_tol:
            return False
    return True


# ---------------------------------------------------------------------------
# JSON serialization (canonical field order, shortest round-trip floats)

def _term_to_dict(term: ConcaveTerm) -> dict:
    return {
        "vars": list(term.var_indices),
        "family": term.spec.family,
        "params": term.spec.to_dict(),
    }


def _term_from_dict(d: dict) -> ConcaveTerm:
    return ConcaveTerm(tuple(d["vars"]), spec_from_dict(d["family"], d["params"]))


def problem_to_dict(problem: Problem) -> dict:
    return {
        "name": problem.name,
        "variables": [
            {"name": v.name, "lower": v.lower, "upper": v.upper, "kind": v.kind}
            for v in problem.variables
        ],
        "objective_linear": {
            "terms": [[i, c] for i, c in problem.objective_linear.terms],
            "constant": problem.objective_linear.constant,
        },
        "concave_terms": [_term_to_dict(t) for t in problem.concave_terms],
        "linear_constraints": [
            {
                "terms": [[i, c] for i, c in con.expr.terms],
                "sense": con.sense,
                "rhs": con.rhs,
            }
            for con in problem.linear_constraints
        ],
        "concave_constraints": [
            {"bound_var": cc.bound_var, "term": _term_to_dict(cc.term)}
            for cc in problem.concave_constraints
        ],
    }


def problem_from_dict(d: dict) -> Problem:
    for key in ("name", "variables", "objective_linear"):
        if key not in d:
            raise ProblemFormatError(f"missing key: {key}")
    try:
        variables = tuple(
            Variable(v["name"], float(v["lower"]), float(v["upper"]), v.get("kind", "continuous"))
            for v in d["variables"]
        )
        obj = d["objective_linear"]
        objective = LinearExpr(tuple((i, c) for i, c in obj.get("terms", [])),
                               float(obj.get("constant", 0.0)))
        terms = tuple(_term_from_dict(t) for t in d.get("concave_terms", []))
        cons = tuple(
            LinearConstraint(
                LinearExpr(tuple((i, c) for i, c in con.get("terms", [])), 0.0),
                con["sense"],
                float(con["rhs"]),
            )
            for con in d.get("linear_constraints", [])
        )
        ccons = tuple(
            ConcaveConstraint(int(cc["bound_var"]), _term_from_dict(cc["term"]))
            for cc in d.get("concave_constraints", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"malformed problem JSON: {exc}") from exc
    return Problem(d["name"], variables, objective, terms, cons, ccons)


def problem_to_json(problem: Problem) -> str:
    return json.dumps(problem_to_dict(problem), indent=2) + "\n"


def write_problem(problem: Problem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(problem_to_json(problem))


def read_problem(path, strict: bool = True) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    problem = problem_from_dict(data)
    if strict:
        diags = validate(problem)
        if diags:
            raise ProblemValidationError(diags)
    return problem
