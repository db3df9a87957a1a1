"""Dense bounded-variable primal simplex with a composite phase 1.

The tableau B^-1 A depends only on the basis, not on variable bounds, so a
branch-and-bound driver can change bounds between solves and re-optimize
from the current basis with a handful of pivots. Phase 1 minimizes the sum
of bound violations of basic variables; phase 2 uses Dantzig pricing with a
Bland fallback once progress stalls.

Rows are stored as equalities A x + s = b with one slack per row whose
bounds encode the row sense: [0, inf) for <=, (-inf, 0] for >=, [0, 0]
for =.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
COST_TOL = 1e-9
PIVOT_TOL = 1e-10
MAX_PIVOTS = 1_000_000
REFRESH_INTERVAL = 4000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SimplexStalledError(RuntimeError):
    """Pivot-count watchdog tripped; the LP solve is stalled."""


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None              # structural values
    objective: float = float("nan")
    duals: np.ndarray | None = None          # one per row
    reduced_costs: np.ndarray | None = None  # structural columns
    basis: np.ndarray | None = None
    iterations: int = 0


class BoundedSimplex:
    """One LP with mutable variable bounds, re-solvable from the last basis."""

    def __init__(self, A, senses, b, lower, upper, costs):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            A = A.reshape(len(b), -1)
        self.m, self.nstruct = A.shape
        m, n = self.m, self.nstruct
        self.N = n + m
        self.Afull = np.hstack([A, np.eye(m)]) if m else A.reshape(0, n)
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.concatenate([np.asarray(costs, dtype=float), np.zeros(m)])

        self.lo = np.empty(self.N)
        self.hi = np.empty(self.N)
        self.lo[:n] = lower
        self.hi[:n] = upper
        for i, s in enumerate(senses):
            if s == "<=":
                self.lo[n + i], self.hi[n + i] = 0.0, np.inf
            elif s == ">=":
                self.lo[n + i], self.hi[n + i] = -np.inf, 0.0
            elif s == "=":
                self.lo[n + i], self.hi[n + i] = 0.0, 0.0
            else:
                raise ValueError(f"unknown sense {s}")

        self.T = self.Afull.copy()
        self.rhs = self.b.copy()
        self.basis = np.arange(n, self.N)
        self.inbasis = np.zeros(self.N, dtype=bool)
        self.inbasis[self.basis] = True
        self.atupper = np.zeros(self.N, dtype=bool)
        self.xval = np.zeros(self.N)
        self._snap_nonbasic(np.arange(self.N))
        self._recompute_basics()

        self.pivots = 0
        self._scale = 1.0 + float(np.max(np.abs(self.c))) if self.N else 1.0
        self._bscale = 1.0 + (float(np.max(np.abs(self.b))) if m else 0.0)

    # -- state maintenance ---------------------------------------------------

    def _snap_nonbasic(self, cols):
        for j in np.atleast_1d(cols):
            if self.inbasis[j]:
                continue
            lo, hi = self.lo[j], self.hi[j]
            if self.atupper[j]:
                if np.isfinite(hi):
                    self.xval[j] = hi
                else:
                    self.atupper[j] = False
                    self.xval[j] = lo if np.isfinite(lo) else 0.0
            else:
                if np.isfinite(lo):
                    self.xval[j] = lo
                elif np.isfinite(hi):
                    self.atupper[j] = True
                    self.xval[j] = hi
                else:
                    self.xval[j] = 0.0

    def _recompute_basics(self):
        if self.m:
            tmp = self.xval.copy()
            tmp[self.basis] = 0.0
            self.xval[self.basis] = self.rhs - self.T @ tmp

    def set_structural_bounds(self, lower, upper):
        self.lo[: self.nstruct] = lower
        self.hi[: self.nstruct] = upper
        nb = np.where(~self.inbasis)[0]
        self._snap_nonbasic(nb)
        self._recompute_basics()

    def _refactorize(self):
        if self.m == 0:
            return
        B = self.Afull[:, self.basis]
        aug = np.hstack([self.Afull, self.b[:, None]])
        try:
            sol = np.linalg.solve(B, aug)
        except np.linalg.LinAlgError as exc:
            raise SimplexStalledError("singular basis during refactorization") from exc
        self.T = sol[:, :-1]
        self.rhs = sol[:, -1]
        self._recompute_basics()

    # -- pivoting ------------------------------------------------------------

    def _pivot(self, r, j):
        piv = self.T[r, j]
        self.T[r] /= piv
        self.rhs[r] /= piv
        col = self.T[:, j].copy()
        col[r] = 0.0
        nz = np.abs(col) > 1e-13
        if nz.any():
            self.T[nz] -= np.outer(col[nz], self.T[r])
            self.rhs[nz] -= col[nz] * self.rhs[r]
        self.T[:, j] = 0.0
        self.T[r, j] = 1.0
        self.pivots += 1
        if self.pivots % REFRESH_INTERVAL == 0:
            self._refactorize()

    def _ratio_test(self, j, sdir, sigma=None):
        """Max step for entering column j moving in direction sdir.

        Returns (t, r, leave_at_upper). r = -1 means the entering variable
        flips to its opposite bound; t = inf means no blocking event.
        In phase 1 (sigma given) violated basics block only when returning
        to the bound they violate, and they leave the basis at that bound.
        """
        t_best = np.inf
        if np.isfinite(self.lo[j]) and np.isfinite(self.hi[j]):
            t_best = self.hi[j] - self.lo[j]
        r_best = -1
        leave_up = False
        if self.m == 0:
            return t_best, r_best, leave_up

        lo_b = self.lo[self.basis]
        hi_b = self.hi[self.basis]
        xb = self.xval[self.basis]
        rate = -sdir * self.T[:, j]

        if sigma is None:
            tgt_up = hi_b
            tgt_dn = lo_b
        else:
            # above-upper rows: block only when coming down, at the upper bound
            # below-lower rows: block only when going up, at the lower bound
            tgt_up = np.where(sigma > 0, np.inf, np.where(sigma < 0, lo_b, hi_b))
            tgt_dn = np.where(sigma < 0, -np.inf, np.where(sigma > 0, hi_b, lo_b))

        t_rows = np.full(self.m, np.inf)
        up = rate > PIVOT_TOL
        dn = rate < -PIVOT_TOL
        with np.errstate(invalid="ignore"):
            t_rows[up] = (tgt_up[up] - xb[up]) / rate[up]
            t_rows[dn] = (tgt_dn[dn] - xb[dn]) / rate[dn]
        t_rows[~np.isfinite(t_rows)] = np.inf
        np.clip(t_rows, 0.0, None, out=t_rows)

        tmin = float(t_rows.min())
        if tmin < t_best - 1e-12:
            near = np.where(t_rows <= tmin + 1e-10)[0]
            r_best = int(near[np.argmax(np.abs(rate[near]))])
            t_best = float(t_rows[r_best])
            if sigma is not None and sigma[r_best] != 0:
                leave_up = sigma[r_best] > 0
            else:
                leave_up = rate[r_best] > 0
        return t_best, r_best, leave_up

    def _choose_entering(self, red, bland, tol):
        can_inc = ~self.inbasis & ~self.atupper
        free = ~np.isfinite(self.lo) & ~np.isfinite(self.hi)
        can_dec = ~self.inbasis & (self.atupper | free)
        inc_ok = can_inc & (red < -tol)
        dec_ok = can_dec & (red > tol)
        if not inc_ok.any() and not dec_ok.any():
            return -1, 0
        if bland:
            cand = np.where(inc_ok | dec_ok)[0]
            j = int(cand[0])
        else:
            score = np.where(inc_ok, -red, 0.0) + np.where(dec_ok, red, 0.0)
            j = int(np.argmax(score))
        return j, (1 if inc_ok[j] else -1)

    def _take_step(self, j, sdir, t, r, leave_up):
        rate = -sdir * self.T[:, j] if self.m else np.zeros(0)
        if self.m:
            self.xval[self.basis] += rate * t
        self.xval[j] += sdir * t
        if r < 0:
            self.atupper[j] = sdir > 0
            self.xval[j] = self.hi[j] if sdir > 0 else self.lo[j]
            return
        lv = self.basis[r]
        bound = self.hi[lv] if leave_up else self.lo[lv]
        if np.isfinite(bound):
            self.xval[lv] = bound
        self.atupper[lv] = leave_up
        self.inbasis[lv] = False
        self.inbasis[j] = True
        self.basis[r] = j
        self._pivot(r, j)

    # -- phases --------------------------------------------------------------

    def _violations(self):
        xb = self.xval[self.basis]
        lo_b = self.lo[self.basis]
        hi_b = self.hi[self.basis]
        ftol = FEAS_TOL * self._bscale
        with np.errstate(invalid="ignore"):
            over = np.where(np.isfinite(hi_b), xb - hi_b, 0.0)
            under = np.where(np.isfinite(lo_b), lo_b - xb, 0.0)
        sigma = np.zeros(self.m)
        sigma[over > ftol] = 1.0
        sigma[under > ftol] = -1.0
        infeas = float(np.sum(over[over > ftol])) + float(np.sum(under[under > ftol]))
        return sigma, infeas

    def _phase1(self):
        if self.m == 0:
            return True
        bland = False
        no_progress = 0
        last_inf = np.inf
        switch_at = 10 * (self.m + self.N)
        retried = False
        for _ in range(MAX_PIVOTS):
            sigma, infeas = self._violations()
            if infeas == 0.0:
                return True
            if infeas < last_inf - 1e-12 * self._bscale:
                last_inf = infeas
                no_progress = 0
            else:
                no_progress += 1
                if no_progress > switch_at:
                    bland = True
            red = -(sigma @ self.T)
            tol = COST_TOL * (1.0 + float(np.max(np.abs(red))) * 1e-3)
            j, sdir = self._choose_entering(red, bland, tol)
            if j < 0:
                if not retried:
                    retried = True
                    self._refactorize()
                    continue
                return False
            t, r, leave_up = self._ratio_test(j, sdir, sigma=sigma)
            if not np.isfinite(t):
                return False
            self._take_step(j, sdir, t, r, leave_up)
        raise SimplexStalledError("phase 1 exceeded the pivot cap")

    def _phase2(self):
        bland = False
        no_progress = 0
        switch_at = 10 * (self.m + self.N)
        last_obj = np.inf
        retried = False
        for _ in range(MAX_PIVOTS):
            red = self.c - (self.c[self.basis] @ self.T) if self.m else self.c.copy()
            j, sdir = self._choose_entering(red, bland, COST_TOL * self._scale)
            if j < 0:
                if not retried and self.m:
                    retried = True
                    self._refactorize()
                    continue
                return OPTIMAL
            t, r, leave_up = self._ratio_test(j, sdir)
            if not np.isfinite(t):
                return UNBOUNDED
            self._take_step(j, sdir, t, r, leave_up)
            obj = float(self.c @ self.xval)
            if obj < last_obj - 1e-12 * self._scale:
                last_obj = obj
                no_progress = 0
            else:
                no_progress += 1
                if no_progress > switch_at:
                    bland = True
        raise SimplexStalledError("phase 2 exceeded the pivot cap")

    # -- public --------------------------------------------------------------

    def solve(self) -> LpResult:
        start_pivots = self.pivots
        if not self._phase1():
            return LpResult(INFEASIBLE, iterations=self.pivots - start_pivots)
        status = self._phase2()
        if status == UNBOUNDED:
            return LpResult(UNBOUNDED, iterations=self.pivots - start_pivots)

        # validate; refactorize and re-solve once if drift shows
        for attempt in range(2):
            resid = float(np.max(np.abs(self.Afull @ self.xval - self.b))) if self.m else 0.0
            xb = self.xval[self.basis]
            ok = (resid <= 1e-8 * self._bscale
                  and bool(np.all(xb >= self.lo[self.basis] - 1e-7 * self._bscale))
                  and bool(np.all(xb <= self.hi[self.basis] + 1e-7 * self._bscale)))
            if ok:
                break
            self._refactorize()
            if attempt == 0:
                if not self._phase1():
                    return LpResult(INFEASIBLE, iterations=self.pivots - start_pivots)
                if self._phase2() == UNBOUNDED:
                    return LpResult(UNBOUNDED, iterations=self.pivots - start_pivots)

        duals = (self.c[self.basis] @ self.T[:, self.nstruct:]) if self.m else np.zeros(0)
        red = self.c - (duals @ self.Afull if self.m else 0.0)
        return LpResult(
            OPTIMAL,
            x=self.xval[: self.nstruct].copy(),
            objective=float(self.c @ self.xval),
            duals=np.asarray(duals, dtype=float).copy(),
            reduced_costs=red[: self.nstruct].copy(),
            basis=self.basis.copy(),
            iterations=self.pivots - start_pivots,
        )
