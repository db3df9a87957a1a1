"""Concave function families for objective terms and concave constraints.

Supported families (all scalar except tabulated, which may hold vector
points and is then evaluated as the upper concave envelope of its samples):

  poly4(c, d, e, h)    c*x^4 + d*x^3 + e*x^2 + h*x
  logLinear(c, d)      c*ln(x) + d*x           (needs x > 0)
  sqrtScaled(gamma)    gamma*sqrt(x)           (needs x >= 0)
  powerScaled(a, p)    a*x^p                   (needs x >= 0 for fractional p)
  tabulated            interpolation of sampled (point, value) pairs
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._denselp import maximize_weights

FAMILIES = ("poly4", "logLinear", "sqrtScaled", "powerScaled", "tabulated")

_PARAM_ORDER = {
    "poly4": ("c", "d", "e", "h"),
    "logLinear": ("c", "d"),
    "sqrtScaled": ("gamma",),
    "powerScaled": ("a", "p"),
    "tabulated": ("points", "values"),
}

CONCAVITY_GRID = 101
CONCAVITY_SLACK = 1e-9


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


def _needs_nonneg(family: str, params: dict) -> bool:
    if family == "sqrtScaled":
        return True
    if family == "powerScaled":
        p = params["p"]
        return p != int(p) or p < 0
    return False


@dataclass(frozen=True)
class ConcaveFunctionSpec:
    """One concave building block, identified by family name and parameters."""

    family: str
    params: dict

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown function family: {self.family}")
        missing = [k for k in _PARAM_ORDER[self.family] if k not in self.params]
        if missing:
            raise ValueError(f"{self.family} missing params {missing}")
        if self.family == "tabulated":
            pts = np.asarray(self.params["points"], dtype=float)
            vals = np.asarray(self.params["values"], dtype=float)
            if pts.shape[0] != vals.shape[0] or pts.shape[0] < 1:
                raise ValueError("tabulated needs matching, nonempty points/values")

    # -- basic geometry ----------------------------------------------------

    @property
    def arity(self) -> int:
        """Number of input coordinates (1 for all closed-form families)."""
        if self.family == "tabulated":
            pts = np.asarray(self.params["points"], dtype=float)
            return 1 if pts.ndim == 1 else pts.shape[1]
        return 1

    def _tab_arrays(self):
        pts = np.asarray(self.params["points"], dtype=float)
        vals = np.asarray(self.params["values"], dtype=float)
        if pts.ndim == 1:
            order = np.argsort(pts)
            return pts[order], vals[order]
        return pts, vals

    def domain_ok(self, lo: np.ndarray, hi: np.ndarray) -> str | None:
        """None if evaluable on the closed box [lo, hi], else a short reason."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        if self.family == "logLinear":
            if lo[0] <= 0:
                return "log domain violation"
        elif _needs_nonneg(self.family, self.params):
            if lo[0] < 0:
                return f"{self.family} requires nonnegative domain"
        return None

    # -- evaluation ---------------------------------------------------------

    def value(self, x) -> float:
        """phi(x); x is a scalar or, for vector tabulated specs, a k-vector."""
        if self.family == "tabulated":
            pts, vals = self._tab_arrays()
            if pts.ndim == 1:
                x = float(np.atleast_1d(x)[0])
                if x < pts[0] - 1e-9 or x > pts[-1] + 1e-9:
                    raise DomainError(f"tabulated point {x} outside [{pts[0]}, {pts[-1]}]")
                return float(np.interp(x, pts, vals))
            value, _ = maximize_weights(pts, vals, np.asarray(x, dtype=float))
            return value

        x = float(np.atleast_1d(x)[0])
        p = self.params
        if self.family == "poly4":
            return x * (p["h"] + x * (p["e"] + x * (p["d"] + x * p["c"])))
        if self.family == "logLinear":
            if x <= 0:
                raise DomainError(f"log of nonpositive value {x}")
            return p["c"] * math.log(x) + p["d"] * x
        if self.family == "sqrtScaled":
            if x < 0:
                raise DomainError(f"sqrt of negative value {x}")
            return p["gamma"] * math.sqrt(x)
        # powerScaled
        if x < 0 and _needs_nonneg(self.family, self.params):
            raise DomainError(f"fractional power of negative value {x}")
        return p["a"] * float(np.power(x, p["p"]))

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation for scalar families."""
        xs = np.asarray(xs, dtype=float)
        p = self.params
        if self.family == "poly4":
            return xs * (p["h"] + xs * (p["e"] + xs * (p["d"] + xs * p["c"])))
        if self.family == "logLinear":
            if np.any(xs <= 0):
                raise DomainError("log of nonpositive value")
            return p["c"] * np.log(xs) + p["d"] * xs
        if self.family == "sqrtScaled":
            if np.any(xs < 0):
                raise DomainError("sqrt of negative value")
            return p["gamma"] * np.sqrt(xs)
        if self.family == "powerScaled":
            if _needs_nonneg(self.family, self.params) and np.any(xs < 0):
                raise DomainError("fractional power of negative value")
            return p["a"] * np.power(xs, p["p"])
        pts, vals = self._tab_arrays()
        if pts.ndim != 1:
            raise DomainError("vector tabulated specs are not scalar-vectorizable")
        if np.any(xs < pts[0] - 1e-9) or np.any(xs > pts[-1] + 1e-9):
            raise DomainError("tabulated point outside sampled range")
        return np.interp(xs, pts, vals)

    # -- derivatives and extrema --------------------------------------------

    def has_derivative(self) -> bool:
        return self.family in ("poly4", "logLinear", "sqrtScaled", "powerScaled")

    def derivative(self, x: float) -> float:
        p = self.params
        if self.family == "poly4":
            return p["h"] + x * (2 * p["e"] + x * (3 * p["d"] + x * 4 * p["c"]))
        if self.family == "logLinear":
            if x <= 0:
                raise DomainError("derivative of log at nonpositive value")
            return p["c"] / x + p["d"]
        if self.family == "sqrtScaled":
            if x <= 0:
                raise DomainError("sqrt derivative singular at 0")
            return p["gamma"] / (2.0 * math.sqrt(x))
        if self.family == "powerScaled":
            pw = p["p"]
            if x == 0 and pw < 1:
                raise DomainError("power derivative singular at 0")
            if x < 0 and _needs_nonneg(self.family, self.params):
                raise DomainError("fractional power of negative value")
            return p["a"] * pw * float(np.power(x, pw - 1))
        raise DomainError("tabulated specs have no analytic derivative")

    def derivative_singular_at(self, x: float) -> bool:
        if not self.has_derivative():
            return True
        try:
            self.derivative(x)
        except DomainError:
            return True
        return False

    def exact_extrema(self, lo: float, hi: float):
        """(phi_max, phi_min) over [lo, hi] by analytic stationary points, or None."""
        p = self.params
        cands = [lo, hi]
        if self.family == "poly4":
            coefs = [4 * p["c"], 3 * p["d"], 2 * p["e"], p["h"]]
            while coefs and coefs[0] == 0:
                coefs = coefs[1:]
            if len(coefs) > 1:
                for r in np.roots(coefs):
                    if abs(r.imag) < 1e-12 and lo < r.real < hi:
                        cands.append(float(r.real))
        elif self.family == "logLinear":
            if p["d"] != 0:
                xstar = -p["c"] / p["d"]
                if lo < xstar < hi:
                    cands.append(xstar)
        elif self.family in ("sqrtScaled", "powerScaled"):
            pass  # monotone on the nonnegative domain, extrema at endpoints
        elif self.family == "tabulated":
            pts, vals = self._tab_arrays()
            if pts.ndim == 1:
                return float(vals.max()), float(vals.min())
            # envelope max is attained at a sample; min(values) underestimates
            # the envelope minimum, which is the safe direction for BigM
            return float(vals.max()), float(vals.min())
        vals = [self.value(c) for c in cands]
        return max(vals), min(vals)

    # -- concavity ----------------------------------------------------------

    def sampled_concavity_ok(self, lo, hi, grid: int = CONCAVITY_GRID,
                             slack: float = CONCAVITY_SLACK) -> bool:
        """Midpoint inequality phi((s+t)/2) >= (phi(s)+phi(t))/2 - slack on a grid."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.family == "tabulated" and self.arity > 1:
            return True  # the upper envelope of samples is concave by construction
        xs = np.linspace(lo[0], hi[0], grid)
        try:
            phi = self.values(xs)
            mids = 0.5 * (xs[:, None] + xs[None, :])
            phim = self.values(mids.ravel()).reshape(grid, grid)
        except DomainError:
            return False
        avg = 0.5 * (phi[:, None] + phi[None, :])
        return bool(np.all(phim >= avg - slack))

    def to_dict(self) -> dict:
        out = {}
        for key in _PARAM_ORDER[self.family]:
            v = self.params[key]
            if isinstance(v, np.ndarray):
                v = v.tolist()
            out[key] = v
        return out


def spec_from_dict(family: str, params: dict) -> ConcaveFunctionSpec:
    return ConcaveFunctionSpec(family, dict(params))
