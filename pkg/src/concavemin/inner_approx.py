"""Breakpoint sets and the piecewise-linear inner approximation of a concave term.

The approximation at x is the best convex combination of sampled function
values whose sample points average to x. For scalar terms that reduces to
interpolation between the two bracketing breakpoints; for vector terms a
small dense LP is solved. The module also estimates Lipschitz constants and
derives the BigM constants used by the complementarity linearization.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._denselp import HullInfeasibleError, maximize_weights
from .functions import DomainError
from .model import ConcaveTerm

DUPLICATE_TOL = 1e-9
SECANT_GRID = 256
VERIFY_GRID = 1024
SAFETY_FACTOR = 1.05
CORNER_LIMIT = 10  # auto mode: corners up to 2^10 points, simplex beyond


@dataclass
class BreakpointSet:
    """Sampled points of one concave term with cached function values."""

    term_index: int
    term: ConcaveTerm
    lower: np.ndarray
    upper: np.ndarray
    points: list = field(default_factory=list)   # each a (k,) float array
    values: list = field(default_factory=list)
    created_at: list = field(default_factory=list)

    @property
    def tau(self) -> int:
        return len(self.points)

    @property
    def arity(self) -> int:
        return len(self.term.var_indices)

    def points_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(self.tau, self.arity)

    def values_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def _eval_spec(self, z: np.ndarray) -> float:
        return self.term.spec.value(z[0] if self.arity == 1 else z)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts = self.points_array()
        if self.arity == 1:
            return pts.min() - tol <= x[0] <= pts.max() + tol
        from ._denselp import in_hull
        return in_hull(pts, x, tol)

    def find(self, z: np.ndarray, tol: float = DUPLICATE_TOL):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        for j, p in enumerate(self.points):
            if np.max(np.abs(p - z)) <= tol:
                return j
        return None

    def max_secant_slope(self) -> float:
        """Largest |secant| between stored points; the exact Lipschitz
        constant of the current approximation for scalar terms."""
        pts = self.points_array()
        vals = self.values_array()
        if self.tau < 2:
            return 0.0
        if self.arity == 1:
            order = np.argsort(pts[:, 0])
            dx = np.diff(pts[order, 0])
            dv = np.diff(vals[order])
            ok = dx > 1e-15
            return float(np.max(np.abs(dv[ok] / dx[ok]))) if ok.any() else 0.0
        best = 0.0
        for a, b in itertools.combinations(range(self.tau), 2):
            dist = float(np.linalg.norm(pts[a] - pts[b]))
            if dist > 1e-15:
                best = max(best, abs(vals[a] - vals[b]) / dist)
        return best

    def to_dict(self) -> dict:
        return {
            "term_index": self.term_index,
            "points": [list(map(float, p)) for p in self.points],
            "values": [float(v) for v in self.values],
            "created_at": list(self.created_at),
        }


@dataclass(frozen=True)
class LipschitzEstimate:
    K: float
    method: str  # "closedForm" | "sampledSecant"
    safety_factor: float = SAFETY_FACTOR
    singular: bool = False


@dataclass(frozen=True)
class BigMValues:
    M1: float
    phi_max: float
    phi_min: float
    delta_z_max: float
    M2: float = 1.0


# ---------------------------------------------------------------------------
# initial sets

def initial_set(term: ConcaveTerm, lower, upper, mode: str = "auto",
                term_index: int = 0, iteration: int = 0) -> BreakpointSet:
    """Initial breakpoints whose hull covers the term's variable box.

    corners: the 2^k box corners. simplex: k+1 points, the images of
    0 and k*e_i from the unit box, which enclose it in a larger hull.
    auto picks corners while 2^k stays small.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    k = len(term.var_indices)
    if mode not in ("corners", "simplex", "auto"):
        raise ValueError(f"unknown init mode: {mode}")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("initial set requires finite bounds")
    if mode == "auto":
        mode = "corners" if k <= CORNER_LIMIT else "simplex"

    if mode == "corners":
        pts = [np.array(c, dtype=float) for c in itertools.product(*zip(lower, upper))]
    else:
        rng = upper - lower
        ys = [np.zeros(k)] + [k * np.eye(k)[i] for i in range(k)]
        pts = [lower + y * rng for y in ys]

    bset = BreakpointSet(term_index, term, lower.copy(), upper.copy())
    for p in pts:
        if bset.find(p) is not None:
            continue
        try:
            v = bset._eval_spec(p)
        except DomainError as exc:
            raise DomainError(f"initial point {p} not evaluable: {exc}") from exc
        bset.points.append(p)
        bset.values.append(v)
        bset.created_at.append(iteration)
    return bset


# ---------------------------------------------------------------------------
# evaluation and refinement

def eval_phi_hat(bset: BreakpointSet, x):
    """Inner-approximation value and optimal weights at x.

    Raises HullInfeasibleError when x is outside the hull of the points.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts = bset.points_array()
    vals = bset.values_array()
    if bset.arity == 1:
        xi = x[0]
        order = np.argsort(pts[:, 0])
        sp = pts[order, 0]
        sv = vals[order]
        if xi < sp[0] - 1e-9 or xi > sp[-1] + 1e-9:
            raise HullInfeasibleError(f"{xi} outside [{sp[0]}, {sp[-1]}]")
        xi = min(max(xi, sp[0]), sp[-1])
        j = int(np.searchsorted(sp, xi, side="right"))
        j = min(max(j, 1), len(sp) - 1)
        a, b = sp[j - 1], sp[j]
        mu = np.zeros(bset.tau)
        if b - a < 1e-15:
            w = 0.0
        else:
            w = (xi - a) / (b - a)
        mu[order[j - 1]] = 1.0 - w
        mu[order[j]] = w
        return float((1.0 - w) * sv[j - 1] + w * sv[j]), mu
    value, mu = maximize_weights(pts, vals, x)
    return value, mu


def add_point(bset: BreakpointSet, z, iteration: int = 0) -> str:
    """Append z (and its value) unless it duplicates an existing point.

    Returns "added" or "duplicate".
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if bset.find(z) is not None:
        return "duplicate"
    if not bset.contains(z):
        raise HullInfeasibleError(f"refinement point {z} outside the initial hull")
    bset.points.append(z.copy())
    bset.values.append(bset._eval_spec(z))
    bset.created_at.append(iteration)
    return "added"


# ---------------------------------------------------------------------------
# Lipschitz constants and BigM

def _grid_secant_max(term: ConcaveTerm, lo: float, hi: float, grid: int) -> float:
    xs = np.linspace(lo, hi, grid)
    vs = term.spec.values(xs)
    dx = np.diff(xs)
    dv = np.diff(vs)
    ok = dx > 1e-15
    return float(np.max(np.abs(dv[ok] / dx[ok]))) if ok.any() else 0.0


def lipschitz_constant(term: ConcaveTerm, lower, upper) -> LipschitzEstimate:
    """Upper bound on |phi'| over the box.

    Closed form for scalar families with an analytic derivative (concavity
    puts the extreme slope at an endpoint); secant sampling otherwise. A
    derivative singularity at a bound falls back to sampling on a box
    shrunk by 1e-9 of its width and flags the estimate.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    k = len(term.var_indices)

    if k > 1 or not term.spec.has_derivative():
        if term.spec.family == "tabulated" and term.spec.arity > 1:
            pts = np.asarray(term.spec.params["points"], dtype=float)
            vals = np.asarray(term.spec.params["values"], dtype=float)
            best = 0.0
            for a, b in itertools.combinations(range(len(pts)), 2):
                dist = float(np.linalg.norm(pts[a] - pts[b]))
                if dist > 1e-15:
                    best = max(best, abs(vals[a] - vals[b]) / dist)
            return LipschitzEstimate(best * SAFETY_FACTOR, "sampledSecant")
        K = _grid_secant_max(term, lower[0], upper[0], SECANT_GRID) * SAFETY_FACTOR
        dense = _grid_secant_max(term, lower[0], upper[0], VERIFY_GRID)
        if K < dense:
            K = dense * SAFETY_FACTOR
        return LipschitzEstimate(K, "sampledSecant")

    lo, hi = float(lower[0]), float(upper[0])
    singular = term.spec.derivative_singular_at(lo) or term.spec.derivative_singular_at(hi)
    if singular:
        slo = lo + 1e-9 * (hi - lo)
        K = _grid_secant_max(term, slo, hi, SECANT_GRID) * SAFETY_FACTOR
        dense = _grid_secant_max(term, slo, hi, VERIFY_GRID)
        if K < dense:
            K = dense * SAFETY_FACTOR
        return LipschitzEstimate(K, "sampledSecant", singular=True)

    K = max(abs(term.spec.derivative(lo)), abs(term.spec.derivative(hi)))
    dense = _grid_secant_max(term, lo, hi, VERIFY_GRID)
    if K < dense:  # guards against a non-concave spec slipping through
        return LipschitzEstimate(dense * SAFETY_FACTOR, "sampledSecant")
    return LipschitzEstimate(K, "closedForm")


def big_m(term: ConcaveTerm, lower, upper, K: LipschitzEstimate) -> BigMValues:
    """Dual-slack bound M1 = K * diam + (phi_max - phi_min), with M2 = 1."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    delta_z = float(np.linalg.norm(upper - lower))

    try:
        # exact for every shipped family (monotone, stationary-point, or sampled)
        phi_max, phi_min = term.spec.exact_extrema(float(lower[0]), float(upper[0]))
    except (DomainError, ValueError, np.linalg.LinAlgError):
        xs = np.linspace(float(lower[0]), float(upper[0]), VERIFY_GRID)
        vs = term.spec.values(xs)
        h = (float(upper[0]) - float(lower[0])) / (VERIFY_GRID - 1)
        phi_max = float(vs.max()) + K.K * h
        phi_min = float(vs.min()) - K.K * h

    return BigMValues(M1=K.K * delta_z + phi_max - phi_min,
                      phi_max=phi_max, phi_min=phi_min, delta_z_max=delta_z)
