"""Built-in branch-and-bound MILP solver and CPLEX-LP text export.

Node LPs share one BoundedSimplex instance: branching only changes variable
bounds, so each node re-optimizes from the current basis in a few pivots.
Branching is on the most fractional integer variable (ties to the lowest
index), node selection is best-bound or depth-first, and everything is
deterministic for a fixed model and parameters.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kkt_master import MilpModel
from .simplex import (INFEASIBLE, OPTIMAL, UNBOUNDED, BoundedSimplex, LpResult,
                      SimplexStalledError)

INT_TOL = 1e-6

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_TIME_LIMIT = "timeLimit"
STATUS_GAP_LIMIT = "gapLimit"


@dataclass(frozen=True)
class SolveParams:
    time_limit_sec: float = 600.0
    relative_gap: float = 1e-6
    node_selection: str = "bestBound"   # bestBound | depthFirst
    branch_rule: str = "mostFractional"
    seed: int = 0

    def __post_init__(self):
        if self.time_limit_sec <= 0:
            raise ValueError("time_limit_sec must be positive")
        if self.relative_gap < 0:
            raise ValueError("relative_gap must be nonnegative")
        if self.node_selection not in ("bestBound", "depthFirst"):
            raise ValueError(f"unknown node selection {self.node_selection}")
        if self.branch_rule != "mostFractional":
            raise ValueError(f"unknown branch rule {self.branch_rule}")


@dataclass
class MilpSolution:
    status: str
    x: np.ndarray | None
    objective: float
    best_bound: float
    nodes_explored: int
    wall_time_s: float


class MilpBackend:
    """Interface point for alternative MILP solvers."""

    name = "abstract"

    def solve(self, model: MilpModel, params: SolveParams) -> MilpSolution:
        raise NotImplementedError


def _model_arrays(model: MilpModel):
    n = model.ncols
    m = len(model.constraints)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for r, (expr, sense, rhs) in enumerate(model.constraints):
        for i, c in expr.terms:
            A[r, i] += c
        b[r] = rhs - expr.constant
        senses.append(sense)
    lo = np.array([v.lower for v in model.variables], dtype=float)
    hi = np.array([v.upper for v in model.variables], dtype=float)
    c = model.objective.to_dense(n)
    return A, senses, b, lo, hi, c


def _tighten_singletons(A, senses, b, lo, hi, int_mask):
    """Bound tightening from rows touching a single variable."""
    for r in range(A.shape[0]):
        nz = np.nonzero(A[r])[0]
        if len(nz) != 1:
            continue
        j = nz[0]
        a = A[r, j]
        val = b[r] / a
        s = senses[r]
        upper = (s == "<=" and a > 0) or (s == ">=" and a < 0) or s == "="
        lower = (s == "<=" and a < 0) or (s == ">=" and a > 0) or s == "="
        if upper:
            hi[j] = min(hi[j], val)
        if lower:
            lo[j] = max(lo[j], val)
    if int_mask.any():
        lo[int_mask] = np.ceil(lo[int_mask] - INT_TOL)
        hi[int_mask] = np.floor(hi[int_mask] + INT_TOL)
    return lo, hi


class BranchAndBound(MilpBackend):
    name = "builtin"

    def solve(self, model: MilpModel, params: SolveParams | None = None) -> MilpSolution:
        params = params or SolveParams()
        start = time.perf_counter()
        deadline = start + params.time_limit_sec

        A, senses, b, lo0, hi0, c = _model_arrays(model)
        n = model.ncols
        int_idx = np.array(model.integer_indices(), dtype=int)
        int_mask = np.zeros(n, dtype=bool)
        int_mask[int_idx] = True
        lo0, hi0 = _tighten_singletons(A, senses, b, lo0.copy(), hi0.copy(), int_mask)
        const = model.objective.constant

        if np.any(lo0 > hi0 + 1e-12):
            return MilpSolution(STATUS_INFEASIBLE, None, math.inf, math.inf, 0,
                                time.perf_counter() - start)

        lp = BoundedSimplex(A, senses, b, lo0, hi0, c)

        best_x = None
        best_obj = math.inf
        nodes = 0
        pruned_min = math.inf
        seq = 0
        use_heap = params.node_selection == "bestBound"
        open_nodes = []  # heap of (bound, seq, lo, hi) or stack of same tuples

        def push(bound, lo, hi):
            nonlocal seq
            entry = (bound, seq, lo, hi)
            seq += 1
            if use_heap:
                heapq.heappush(open_nodes, entry)
            else:
                open_nodes.append(entry)

        def pop():
            return heapq.heappop(open_nodes) if use_heap else open_nodes.pop()

        def prune_threshold():
            if not math.isfinite(best_obj):
                return math.inf
            return best_obj - max(1e-9, params.relative_gap * max(1.0, abs(best_obj)))

        push(-math.inf, lo0, hi0)
        hit_time = False

        while open_nodes:
            if time.perf_counter() > deadline:
                hit_time = True
                break
            bound, _, nlo, nhi = pop()
            if bound >= prune_threshold():
                pruned_min = min(pruned_min, bound)
                continue

            lp.set_structural_bounds(nlo, nhi)
            try:
                res = lp.solve()
            except SimplexStalledError:
                lp = BoundedSimplex(A, senses, b, nlo, nhi, c)
                res = lp.solve()
            nodes += 1
            if res.status == INFEASIBLE:
                continue
            if res.status == UNBOUNDED:
                raise RuntimeError("unbounded node LP; model lacks finite bounds")
            obj = res.objective + const
            if obj >= prune_threshold():
                pruned_min = min(pruned_min, obj)
                continue

            x = res.x
            if len(int_idx):
                vals = x[int_idx]
                dist = np.abs(vals - np.round(vals))
                frac_pos = np.where(dist > INT_TOL)[0]
            else:
                frac_pos = np.array([], dtype=int)

            if frac_pos.size == 0:
                xint = x.copy()
                if len(int_idx):
                    xint[int_idx] = np.round(xint[int_idx])
                cand = float(c @ xint) + const
                if cand < best_obj:
                    best_obj = cand
                    best_x = xint
                continue

            # most fractional, ties to the lowest variable index
            scores = np.minimum(np.abs(x[int_idx] - np.floor(x[int_idx])),
                                np.abs(np.ceil(x[int_idx]) - x[int_idx]))
            best_score = scores[frac_pos].max()
            ties = frac_pos[scores[frac_pos] >= best_score - 1e-12]
            j = int(int_idx[int(ties.min())])
            fl = math.floor(x[j])

            lo_up, hi_up = nlo.copy(), nhi.copy()
            lo_up[j] = fl + 1
            lo_dn, hi_dn = nlo.copy(), nhi.copy()
            hi_dn[j] = fl
            # push up first so depth-first explores the floor child first
            if lo_up[j] <= hi_up[j]:
                push(obj, lo_up, hi_up)
            if lo_dn[j] <= hi_dn[j]:
                push(obj, lo_dn, hi_dn)

        wall = time.perf_counter() - start
        open_min = min((e[0] for e in open_nodes), default=math.inf)
        best_bound = min(best_obj, pruned_min, open_min)
        if not math.isfinite(best_bound):
            best_bound = best_obj

        if best_x is None:
            status = STATUS_TIME_LIMIT if hit_time else STATUS_INFEASIBLE
            return MilpSolution(status, None, math.inf, best_bound, nodes, wall)
        if hit_time:
            status = STATUS_TIME_LIMIT
        else:
            gap = best_obj - best_bound
            if gap <= max(1e-9, 1e-6 * max(1.0, abs(best_obj))):
                status = STATUS_OPTIMAL
            else:
                status = STATUS_GAP_LIMIT
        return MilpSolution(status, best_x, best_obj, best_bound, nodes, wall)


def solve_milp(model: MilpModel, params: SolveParams | None = None,
               backend: MilpBackend | None = None) -> MilpSolution:
    backend = backend or BranchAndBound()
    return backend.solve(model, params or SolveParams())


def solve_lp(model: MilpModel) -> LpResult:
    """Solve the LP relaxation (integrality dropped)."""
    A, senses, b, lo, hi, c = _model_arrays(model)
    res = BoundedSimplex(A, senses, b, lo, hi, c).solve()
    if res.status == OPTIMAL:
        res.objective += model.objective.constant
    return res


# ---------------------------------------------------------------------------
# CPLEX-LP text export

def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _expr_text(terms, names) -> str:
    parts = []
    for i, coef in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = _num(abs(coef))
        parts.append(f"{sign} {mag} {names[i]}")
    if not parts:
        return "0 " + (names[0] if names else "x0")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp(model: MilpModel, path) -> None:
    """Write the model in CPLEX-LP text format."""
    from .kkt_master import sanitize_name

    names = []
    seen = set()
    for i, v in enumerate(model.variables):
        nm = sanitize_name(v.name)
        if nm in seen:
            nm = f"{nm}_{i}"
        seen.add(nm)
        names.append(nm)
    lines = [f"\\ {model.name}"]
    if model.objective.constant:
        lines.append(f"\\ objective constant (not expressible in LP format): "
                     f"{_num(model.objective.constant)}")
    lines.append("Minimize")
    lines.append(" obj: " + _expr_text(model.objective.terms, names))
    lines.append("Subject To")
    for r, (expr, sense, rhs) in enumerate(model.constraints):
        op = {"<=": "<=", ">=": ">=", "=": "="}[sense]
        lines.append(f" c{r}: {_expr_text(expr.terms, names)} {op} {_num(rhs - expr.constant)}")
    lines.append("Bounds")
    for i, v in enumerate(model.variables):
        if v.kind == "binary":
            continue
        lodesc = "-inf" if math.isinf(v.lower) else _num(v.lower)
        hidesc = "+inf" if math.isinf(v.upper) else _num(v.upper)
        lines.append(f" {lodesc} <= {names[i]} <= {hidesc}")
    generals = [names[i] for i, v in enumerate(model.variables) if v.kind == "integer"]
    binaries = [names[i] for i, v in enumerate(model.variables) if v.kind == "binary"]
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(generals))
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
