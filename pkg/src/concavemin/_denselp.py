"""Tiny dense two-phase simplex for the breakpoint-weight linear program.

Solves   max  v . mu
         s.t. sum_j mu_j         = 1
              sum_j mu_j z_k^j   = x_k   (k rows)
              mu >= 0

The system has k+1 equality rows and tau columns, both small, so a plain
dense tableau with artificial variables is adequate and keeps this module
free of any dependency on the full MILP backend.
"""

from __future__ import annotations

import numpy as np

_TOL = 1e-9
_MAX_ITERS = 20_000


class HullInfeasibleError(ValueError):
    """Raised when the query point lies outside the convex hull of the points."""


def maximize_weights(points: np.ndarray, values: np.ndarray, x: np.ndarray):
    """Best convex-combination value of ``values`` whose points average to ``x``.

    points: (tau, k) array, values: (tau,), x: (k,).
    Returns (value, mu) with mu the optimal weights.
    Raises HullInfeasibleError if x is not in conv(points).
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tau, k = points.shape

    # rows: [sum mu = 1 ; points^T mu = x], scaled so rhs >= 0
    A = np.vstack([np.ones((1, tau)), points.T])
    b = np.concatenate([[1.0], x])
    m = k + 1
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # columns: tau weight columns, then m artificials (identity)
    T = np.hstack([A, np.eye(m)])
    rhs = b.copy()
    basis = np.arange(tau, tau + m)

    scale = 1.0 + float(np.max(np.abs(b)))

    def pivot(r, j):
        piv = T[r, j]
        T[r] /= piv
        rhs[r] /= piv
        col = T[:, j].copy()
        col[r] = 0.0
        T[:] -= np.outer(col, T[r])
        rhs[:] -= col * rhs[r]
        T[:, j] = 0.0
        T[r, j] = 1.0
        basis[r] = j

    def run(costs, allowed):
        for _ in range(_MAX_ITERS):
            y = costs[basis] @ T
            red = costs - y
            cand = np.where(allowed & (red < -_TOL * scale))[0]
            if cand.size == 0:
                return
            j = cand[np.argmin(red[cand])]
            col = T[:, j]
            pos = col > _TOL
            if not pos.any():
                # degenerate unbounded direction; cannot happen with sum mu = 1
                return
            ratios = np.full(m, np.inf)
            ratios[pos] = rhs[pos] / col[pos]
            r = int(np.argmin(ratios))
            pivot(r, j)
        raise RuntimeError("weight LP stalled")

    # phase 1: drive artificials to zero
    c1 = np.zeros(tau + m)
    c1[tau:] = 1.0
    allowed = np.ones(tau + m, dtype=bool)
    run(c1, allowed)
    infeas = float(rhs[basis >= tau].sum()) if (basis >= tau).any() else 0.0
    if infeas > 1e-7 * scale:
        raise HullInfeasibleError("point outside the convex hull of the breakpoints")

    # phase 2: maximize values (minimize negated), artificials barred
    allowed[tau:] = False
    c2 = np.zeros(tau + m)
    c2[:tau] = -values
    run(c2, allowed)

    mu = np.zeros(tau)
    struct = basis < tau
    mu[basis[struct]] = rhs[struct]
    mu = np.clip(mu, 0.0, None)
    s = mu.sum()
    if s > 0:
        mu /= s
    return float(values @ mu), mu


def in_hull(points: np.ndarray, x: np.ndarray, tol: float = 1e-9) -> bool:
    """Convex-hull membership by phase-1 feasibility."""
    try:
        maximize_weights(points, np.zeros(len(points)), x)
    except HullInfeasibleError:
        return False
    return True
