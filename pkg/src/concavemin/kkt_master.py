"""Single-level MILP assembly for the inner-approximation lower-bound problem.

For each concave term with breakpoints z^1..z^tau the weight LP

    max { sum_j mu_j phi(z^j) : sum_j mu_j = 1, sum_j mu_j z^j = x, mu >= 0 }

is replaced by its KKT system (stationarity with multipliers alpha, beta_k,
gamma_j and complementarity mu_j * gamma_j = 0), and the complementarity
products are linearized with binaries u_j:

    gamma_j <= M1 u_j,   mu_j <= 1 - u_j.

The resulting model minimizes f(x) + sum_t zeta_t subject to the original
linear rows, so its optimum equals the piecewise-linear lower bound.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .inner_approx import BigMValues, BreakpointSet
from .model import LinearExpr, Problem

_NAME_RE = re.compile(r"[^A-Za-z0-9_]")


def sanitize_name(name: str) -> str:
    clean = _NAME_RE.sub("_", name)
    if not clean or not (clean[0].isalpha() and clean[0] not in "eE"):
        clean = "v_" + clean
    return clean


@dataclass(frozen=True)
class MilpVariable:
    name: str
    lower: float
    upper: float
    kind: str = "continuous"  # continuous | integer | binary


@dataclass
class MilpModel:
    """Mixed-integer linear program, minimization sense."""

    name: str
    variables: list = field(default_factory=list)
    objective: LinearExpr = LinearExpr()
    constraints: list = field(default_factory=list)  # (LinearExpr, sense, rhs)

    @property
    def ncols(self) -> int:
        return len(self.variables)

    def add_variable(self, name, lower, upper, kind="continuous") -> int:
        self.variables.append(MilpVariable(name, float(lower), float(upper), kind))
        return len(self.variables) - 1

    def add_constraint(self, terms, sense, rhs) -> None:
        self.constraints.append((LinearExpr(tuple(terms)), sense, float(rhs)))

    def integer_indices(self) -> list:
        return [i for i, v in enumerate(self.variables) if v.kind in ("integer", "binary")]


@dataclass
class TermBlock:
    """Column/row bookkeeping for one concave term's KKT block."""

    kind: str                 # "objective" | "constraint"
    mu: list
    u: list
    gamma: list
    alpha: int
    beta: list
    zeta: int | None          # objective terms only
    bound_var: int | None     # constraint terms only
    var_indices: tuple        # original x columns tied by sum mu z = x


@dataclass
class MasterMap:
    n_original: int
    blocks: list


class MasterBuildError(ValueError):
    pass


class MasterConsistencyError(RuntimeError):
    """Extracted solution violates sum(mu_jز^j) = x; BigM or backend defect."""


def _dual_bounds(bm: BigMValues, pts: np.ndarray):
    """Finite boxes for the free multipliers alpha and beta.

    Wide enough to certify every x in the hull: |beta| needs at most the
    approximation's slope bound, and alpha at most max|phi| plus beta times
    the largest breakpoint norm.
    """
    K = 0.0
    if bm.delta_z_max > 0:
        K = max(0.0, (bm.M1 - (bm.phi_max - bm.phi_min)) / bm.delta_z_max)
    base = bm.M1 + abs(bm.phi_max) + abs(bm.phi_min) + 1.0
    beta_bound = max(base, K + 1.0)
    max_norm = float(np.max(np.linalg.norm(pts, axis=1))) if len(pts) else 0.0
    alpha_bound = max(base, abs(bm.phi_max) + abs(bm.phi_min) + (K + 1.0) * (1.0 + max_norm) + 1.0)
    return alpha_bound, beta_bound


def build_master(problem: Problem, sets: list, big_ms: list,
                 constraint_m1: float | None = None):
    """Assemble the lower-bound MILP from a problem and its breakpoint sets.

    sets/big_ms carry one entry per concave term, objective terms first and
    then concave-constraint terms, in problem order. Returns (MilpModel,
    MasterMap). Concave constraints use constraint_m1 when given, otherwise
    a conservative fallback of 10x the term's own M1.
    """
    terms = problem.all_terms()
    if len(sets) != len(terms) or len(big_ms) != len(terms):
        raise MasterBuildError("need one breakpoint set and one BigM per concave term")

    model = MilpModel(name=problem.name)
    for v in problem.variables:
        model.add_variable(sanitize_name(v.name), v.lower, v.upper, v.kind)
    n = problem.n

    obj_terms = list(problem.objective_linear.terms)
    obj_const = problem.objective_linear.constant

    for expr, rhs in problem.leq_rows():
        model.add_constraint(expr.terms, "<=", rhs - expr.constant)

    blocks = []
    n_obj_terms = len(problem.concave_terms)
    for t, (term, bset, bm) in enumerate(zip(terms, sets, big_ms)):
        is_obj = t < n_obj_terms
        tau = bset.tau
        k = bset.arity
        pts = bset.points_array()
        vals = bset.values_array()
        alpha_bound, beta_bound = _dual_bounds(bm, pts)

        mu = [model.add_variable(f"mu_t{t}_{j}", 0.0, 1.0) for j in range(tau)]
        u = [model.add_variable(f"u_t{t}_{j}", 0.0, 1.0, "binary") for j in range(tau)]
        gamma = [model.add_variable(f"gam_t{t}_{j}", 0.0, max(bm.M1, 0.0)) for j in range(tau)]
        alpha = model.add_variable(f"alpha_t{t}", -alpha_bound, alpha_bound)
        beta = [model.add_variable(f"beta_t{t}_{kk}", -beta_bound, beta_bound) for kk in range(k)]

        if is_obj:
            zeta = model.add_variable(f"zeta_t{t}", bm.phi_min - 1.0, bm.phi_max + 1.0)
            bound_var = None
            obj_terms.append((zeta, 1.0))
            # sum_j mu_j phi(z^j) <= zeta
            model.add_constraint([(mu[j], vals[j]) for j in range(tau)] + [(zeta, -1.0)],
                                 "<=", 0.0)
            m1 = bm.M1
        else:
            zeta = None
            bound_var = problem.concave_constraints[t - n_obj_terms].bound_var
            # x_bound >= sum_j mu_j phi(z^j)
            model.add_constraint([(mu[j], vals[j]) for j in range(tau)] + [(bound_var, -1.0)],
                                 "<=", 0.0)
            m1 = constraint_m1 if constraint_m1 is not None else 10.0 * max(bm.M1, 1.0)

        # convexity and coupling rows
        model.add_constraint([(mu[j], 1.0) for j in range(tau)], "=", 1.0)
        for kk, xi in enumerate(term.var_indices):
            model.add_constraint(
                [(mu[j], pts[j, kk]) for j in range(tau)] + [(xi, -1.0)], "=", 0.0)

        # stationarity: phi(z^j) - alpha - sum_k beta_k z_k^j + gamma_j = 0
        for j in range(tau):
            row = [(alpha, -1.0)] + [(beta[kk], -pts[j, kk]) for kk in range(k)] + [(gamma[j], 1.0)]
            model.add_constraint(row, "=", -vals[j])

        # linearized complementarity
        for j in range(tau):
            model.add_constraint([(gamma[j], 1.0), (u[j], -m1)], "<=", 0.0)
            model.add_constraint([(mu[j], 1.0), (u[j], 1.0)], "<=", 1.0)

        blocks.append(TermBlock("objective" if is_obj else "constraint",
                                mu, u, gamma, alpha, beta, zeta, bound_var,
                                term.var_indices))

    model.objective = LinearExpr(tuple(obj_terms), obj_const)
    return model, MasterMap(n_original=n, blocks=blocks)


def extract_solution(mapping: MasterMap, milp_solution, sets: list,
                     tol: float = 1e-6):
    """Original point, bound value, and per-term approximation values.

    Verifies sum_j mu_j z^j = x for every block; a violation indicates an
    invalid BigM or a backend defect.
    """
    if milp_solution.x is None:
        raise MasterConsistencyError(f"no incumbent in state {milp_solution.status}")
    xfull = np.asarray(milp_solution.x, dtype=float)
    x = xfull[: mapping.n_original].copy()
    per_term = []
    for block, bset in zip(mapping.blocks, sets):
        mu = xfull[block.mu]
        pts = bset.points_array()
        recon = mu @ pts
        target = x[list(block.var_indices)]
        err = float(np.max(np.abs(recon - target)))
        if err > tol:
            raise MasterConsistencyError(
                f"weights reproduce x only to {err:.3e} (> {tol:.1e})")
        if block.zeta is not None:
            per_term.append(float(xfull[block.zeta]))
        else:
            per_term.append(float(mu @ bset.values_array()))
    return x, float(milp_solution.objective), per_term
