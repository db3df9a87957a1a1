"""Iterative inner-approximation solver.

Each iteration assembles the lower-bound MILP from the current breakpoint
sets, solves it, reads off a feasible point z, updates the bounds

    LB <- master objective,   UB <- min(UB, f(z) + phi(z)),

and refines every term's breakpoint set with its slice of z. The loop stops
at the relative-gap target, when every term reports the refinement point as
a duplicate (the approximation is exact there, so the incumbent is optimal),
or at the iteration/time limits.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import inner_approx as ia
from .kkt_master import build_master, extract_solution
from .milp_backend import (STATUS_GAP_LIMIT, STATUS_INFEASIBLE, STATUS_OPTIMAL,
                           MilpBackend, SolveParams, solve_milp)
from .model import INTEGRALITY_TOL, Problem, eval_objective, point_feasible, validate

GAP_FLOOR = 1e-10


class InfeasibleProblemError(RuntimeError):
    """The lower-bound MILP is infeasible, so the problem itself is."""

    def __init__(self, iteration: int):
        super().__init__(f"master infeasible at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class IAParams:
    epsilon: float = 0.01
    max_wall_time_sec: float = 7200.0
    max_iterations: int = 10000
    init_mode: str = "auto"          # corners | simplex | auto
    milp_params: SolveParams = field(default_factory=SolveParams)
    constraint_m1: float | None = None  # BigM for concave-constraint blocks

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class IterationRecord:
    iteration: int
    master_objective: float
    solution: np.ndarray
    ub_candidate: float | None
    breakpoints_added: list          # per term: added point (list) or None
    master_vars: int
    master_rows: int
    master_binaries: int
    milp_nodes: int
    milp_status: str
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "master_objective": self.master_objective,
            "solution": [float(v) for v in self.solution],
            "ub_candidate": self.ub_candidate,
            "breakpoints_added": [
                None if p is None else [float(v) for v in p]
                for p in self.breakpoints_added
            ],
            "master_vars": self.master_vars,
            "master_rows": self.master_rows,
            "master_binaries": self.master_binaries,
            "milp_nodes": self.milp_nodes,
            "milp_status": self.milp_status,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class IAResult:
    status: str                      # optimal | gapReached | timeLimit | iterLimit
    incumbent: np.ndarray | None
    upper_bound: float
    lower_bound: float
    gap: float
    iterations: list
    breakpoint_sets: list
    f_lipschitz: float = 0.0         # max|coef| * sqrt(n) for the linear part
    phi_lipschitz: float = 0.0       # combined bound over all concave terms
    total_nodes: int = 0
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "incumbent": None if self.incumbent is None else [float(v) for v in self.incumbent],
            "upper_bound": self.upper_bound,
            "lower_bound": self.lower_bound,
            "gap": self.gap,
            "f_lipschitz": self.f_lipschitz,
            "phi_lipschitz": self.phi_lipschitz,
            "total_nodes": self.total_nodes,
            "wall_time_s": self.wall_time_s,
            "iterations": [rec.to_dict() for rec in self.iterations],
            "breakpoint_sets": [bs.to_dict() for bs in self.breakpoint_sets],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def relative_gap(ub: float, lb: float) -> float:
    if not math.isfinite(ub) or not math.isfinite(lb):
        return math.inf
    return (ub - lb) / max(abs(lb), GAP_FLOOR)


def _f_lipschitz(problem: Problem) -> float:
    coefs = [abs(c) for _, c in problem.objective_linear.terms]
    return (max(coefs) if coefs else 0.0) * math.sqrt(max(problem.n, 1))


def _phi_lipschitz(problem: Problem, term_ks: list) -> float:
    """Combined Lipschitz bound for the separable concave part."""
    used = [i for t in problem.concave_terms for i in t.var_indices]
    disjoint = len(used) == len(set(used))
    ks = term_ks[: len(problem.concave_terms)]
    if not ks:
        return 0.0
    if disjoint:
        return math.sqrt(sum(k * k for k in ks))
    return float(sum(ks))


def _snap_point(problem: Problem, x: np.ndarray) -> np.ndarray:
    """Clean FP noise: round near-integral values, clip to bounds."""
    x = np.asarray(x, dtype=float).copy()
    ints = problem.integer_mask()
    rounded = np.round(x[ints])
    close = np.abs(x[ints] - rounded) <= INTEGRALITY_TOL
    x[ints] = np.where(close, rounded, x[ints])
    return np.clip(x, problem.lower_bounds(), problem.upper_bounds())


def solve(problem: Problem, params: IAParams | None = None,
          backend: MilpBackend | None = None) -> IAResult:
    """Run the refinement loop to the gap target or a termination proof."""
    params = params or IAParams()
    diags = validate(problem)
    if diags:
        raise ValueError("problem failed validation: " + "; ".join(diags))

    start = time.perf_counter()
    deadline = start + params.max_wall_time_sec

    terms = problem.all_terms()
    sets, base_ks = [], []
    for t, term in enumerate(terms):
        lo, hi = problem.term_bounds(term)
        sets.append(ia.initial_set(term, lo, hi, params.init_mode, term_index=t))
        base_ks.append(ia.lipschitz_constant(term, lo, hi))

    lb = -math.inf
    ub = math.inf
    incumbent = None
    records = []
    total_nodes = 0
    status = "iterLimit"

    for it in range(1, params.max_iterations + 1):
        iter_start = time.perf_counter()
        if iter_start > deadline and it > 1:
            status = "timeLimit"
            break

        big_ms = []
        for term, bset, kest in zip(terms, sets, base_ks):
            lo, hi = problem.term_bounds(term)
            slope = bset.max_secant_slope() * ia.SAFETY_FACTOR
            keff = kest if kest.K >= slope else replace(kest, K=slope, method="sampledSecant")
            big_ms.append(ia.big_m(term, lo, hi, keff))

        model, mapping = build_master(problem, sets, big_ms,
                                      constraint_m1=params.constraint_m1)
        remaining = max(deadline - time.perf_counter(), 1.0)
        mp = params.milp_params
        msol = solve_milp(model, replace(mp, time_limit_sec=min(mp.time_limit_sec, remaining)),
                          backend=backend)
        total_nodes += msol.nodes_explored

        if msol.status == STATUS_INFEASIBLE:
            raise InfeasibleProblemError(it)
        if msol.status not in (STATUS_OPTIMAL, STATUS_GAP_LIMIT):
            if msol.x is None:
                status = "timeLimit"
                break
        z, master_obj, _ = extract_solution(mapping, msol, sets)
        z = _snap_point(problem, z)
        lb = master_obj

        ub_cand = None
        if point_feasible(problem, z):
            ub_cand = eval_objective(problem, z, check=False)
            if ub_cand < ub:
                ub = ub_cand
                incumbent = z.copy()

        added = []
        all_duplicate = True
        for term, bset in zip(terms, sets):
            sub = z[list(term.var_indices)]
            outcome = ia.add_point(bset, sub, iteration=it)
            if outcome == "added":
                added.append(sub.copy())
                all_duplicate = False
            else:
                added.append(None)

        records.append(IterationRecord(
            iteration=it,
            master_objective=master_obj,
            solution=z,
            ub_candidate=ub_cand,
            breakpoints_added=added,
            master_vars=model.ncols,
            master_rows=len(model.constraints),
            master_binaries=sum(1 for v in model.variables if v.kind == "binary"),
            milp_nodes=msol.nodes_explored,
            milp_status=msol.status,
            wall_time_s=time.perf_counter() - iter_start,
        ))

        gap = relative_gap(ub, lb)
        if all_duplicate:
            status = "optimal"
            break
        if gap <= params.epsilon:
            status = "optimal" if gap <= 1e-9 else "gapReached"
            break
        if msol.status == "timeLimit":
            status = "timeLimit"
            break
        if time.perf_counter() > deadline:
            status = "timeLimit"
            break
    else:
        status = "iterLimit"

    return IAResult(
        status=status,
        incumbent=incumbent,
        upper_bound=ub,
        lower_bound=lb,
        gap=relative_gap(ub, lb),
        iterations=records,
        breakpoint_sets=sets,
        f_lipschitz=_f_lipschitz(problem),
        phi_lipschitz=_phi_lipschitz(problem, [k.K for k in base_ks]),
        total_nodes=total_nodes,
        wall_time_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# trace verification

def check_trace(result: IAResult, tol: float = 1e-9) -> list:
    """Violations of the convergence guarantees in a finished trace.

    (a) the master objective never decreases;
    (b) a repeated solution only occurs at the terminal iteration;
    (c) for consecutive iterations, the previous feasible value minus the
        new master objective is at most (K_f + K_phi) times the step length.
    """
    out = []
    recs = result.iterations
    if not recs:
        return ["empty trace"]
    for i in range(len(recs) - 1):
        if recs[i + 1].master_objective < recs[i].master_objective - tol:
            out.append(
                f"lower bound decreased at iteration {recs[i + 1].iteration}: "
                f"{recs[i].master_objective} -> {recs[i + 1].master_objective}")
    for i in range(len(recs) - 1):
        same = np.max(np.abs(np.asarray(recs[i + 1].solution)
                             - np.asarray(recs[i].solution))) <= ia.DUPLICATE_TOL
        if same and i + 1 != len(recs) - 1:
            out.append(
                f"solution repeated at iteration {recs[i + 1].iteration} "
                f"without terminating")
    ksum = result.f_lipschitz + result.phi_lipschitz
    for i in range(len(recs) - 1):
        prev, nxt = recs[i], recs[i + 1]
        if prev.ub_candidate is None:
            continue
        delta = float(np.linalg.norm(np.asarray(nxt.solution) - np.asarray(prev.solution)))
        slack = prev.ub_candidate - nxt.master_objective
        if slack > ksum * delta + 1e-6:
            out.append(
                f"gap bound violated between iterations {prev.iteration} and "
                f"{nxt.iteration}: {slack} > ({ksum}) * {delta} + 1e-6")
    return out
