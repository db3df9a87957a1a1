"""Deterministic random instance generators.

Two families are produced:

* concave separable integer knapsack ("csink"): n integer variables in
  [1, 5], m covering-style rows with negative coefficients, and one concave
  objective term per variable drawn from a quadratic, cubic, quartic, or
  logarithmic family.

* production-transportation ("pt"): m sources with capacity 200 and a
  concave production cost gamma_i * sqrt(y_i), n destinations with equal
  demand, and either continuous shipments (multiple sourcing) or binary
  source assignment (single sourcing).

Randomness comes from numpy's PCG64 seeded through SeedSequence, with one
spawned child stream per parameter block. Draw order (documented so that
instances are reproducible from the seed alone):

  csink: stream 0 draws A row-major; b is computed, not drawn; stream 1
  draws the objective coefficients for j = 0..n-1 in the family's canonical
  parameter order (quadratic e,h; cubic d,e,h; quartic c,d,e,h; log c,d).

  pt: stream 0 draws gamma_i ascending i; stream 1 draws c_ij row-major.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functions import ConcaveFunctionSpec
from .model import (ConcaveTerm, LinearConstraint, LinearExpr, Problem, Variable)

GENERATOR_VERSION = "1"

CSINK_FAMILIES = ("quadratic", "cubic", "quartic", "logarithmic")
PT_CAPACITY = 200.0


@dataclass(frozen=True)
class CsinkConfig:
    n: int
    m: int
    family: str
    r: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")
        if self.family not in CSINK_FAMILIES:
            raise ValueError(f"unknown csink family {self.family}")


@dataclass(frozen=True)
class PtConfig:
    m: int
    n: int
    rho: float
    sourcing: str = "multiple"
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be at least 1")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.sourcing not in ("multiple", "single"):
            raise ValueError(f"unknown sourcing {self.sourcing}")

    @property
    def demand(self) -> int:
        return math.ceil(self.rho * self.m * PT_CAPACITY / self.n)

    def capacity_feasible(self) -> bool:
        return self.m * PT_CAPACITY >= self.n * self.demand


def _open_uniform(rng, low, high):
    """Uniform on the open interval (low, high); endpoints are redrawn."""
    while True:
        v = float(rng.uniform(low, high))
        if low < v < high:
            return v


def gen_csink(cfg: CsinkConfig) -> Problem:
    root = np.random.SeedSequence(cfg.seed)
    a_stream, obj_stream = [np.random.default_rng(s) for s in root.spawn(2)]

    n, m = cfg.n, cfg.m
    lo, hi = 1.0, 5.0
    A = a_stream.uniform(-20.0, -10.0, size=(m, n))
    row_lo = A.sum(axis=1) * lo
    row_hi = A.sum(axis=1) * hi
    b = row_lo + cfg.r * (row_hi - row_lo)

    variables = tuple(Variable(f"x_{j}", lo, hi, "integer") for j in range(n))
    constraints = tuple(
        LinearConstraint(LinearExpr(tuple((j, A[i, j]) for j in range(n))), "<=", float(b[i]))
        for i in range(m)
    )

    terms = []
    for j in range(n):
        if cfg.family == "quadratic":
            e = float(obj_stream.uniform(-15.0, -1.0))
            h = float(obj_stream.uniform(-5.0, 5.0))
            spec = ConcaveFunctionSpec("poly4", {"c": 0.0, "d": 0.0, "e": e, "h": h})
        elif cfg.family == "cubic":
            d = _open_uniform(obj_stream, -1.0, 0.0)
            e = float(obj_stream.uniform(-15.0, -1.0))
            h = float(obj_stream.uniform(-5.0, 5.0))
            spec = ConcaveFunctionSpec("poly4", {"c": 0.0, "d": d, "e": e, "h": h})
        elif cfg.family == "quartic":
            c = _open_uniform(obj_stream, -1.0, 0.0)
            d = _open_uniform(obj_stream, -5.0, 0.0)
            e = float(obj_stream.uniform(-15.0, -1.0))
            h = float(obj_stream.uniform(-5.0, 5.0))
            spec = ConcaveFunctionSpec("poly4", {"c": c, "d": d, "e": e, "h": h})
        else:
            c = _open_uniform(obj_stream, 0.0, 1.0)
            d = float(obj_stream.uniform(-20.0, -10.0))
            spec = ConcaveFunctionSpec("logLinear", {"c": c, "d": d})
        terms.append(ConcaveTerm((j,), spec))

    name = f"csink-{cfg.family}-n{n}-m{m}-r{cfg.r}-s{cfg.seed}"
    return Problem(name, variables, LinearExpr(), tuple(terms), constraints)


def gen_pt(cfg: PtConfig) -> Problem:
    root = np.random.SeedSequence(cfg.seed)
    g_stream, c_stream = [np.random.default_rng(s) for s in root.spawn(2)]

    m, n = cfg.m, cfg.n
    gamma = g_stream.integers(10, 21, size=m)
    cost = c_stream.integers(1, 11, size=(m, n))
    d = float(cfg.demand)

    variables = []
    if cfg.sourcing == "multiple":
        for i in range(m):
            for j in range(n):
                variables.append(Variable(f"x_{i}_{j}", 0.0, d, "continuous"))
    else:
        for i in range(m):
            for j in range(n):
                variables.append(Variable(f"x_{i}_{j}", 0.0, 1.0, "binary"))
    for i in range(m):
        variables.append(Variable(f"y_{i}", 0.0, PT_CAPACITY, "continuous"))

    def xcol(i, j):
        return i * n + j

    ybase = m * n
    rows = []
    if cfg.sourcing == "multiple":
        for i in range(m):
            rows.append(LinearConstraint(
                LinearExpr(tuple((xcol(i, j), 1.0) for j in range(n)) + ((ybase + i, -1.0),)),
                "<=", 0.0))
        for j in range(n):
            rows.append(LinearConstraint(
                LinearExpr(tuple((xcol(i, j), 1.0) for i in range(m))), ">=", d))
        obj = LinearExpr(tuple((xcol(i, j), float(cost[i, j]))
                               for i in range(m) for j in range(n)))
    else:
        for i in range(m):
            rows.append(LinearConstraint(
                LinearExpr(tuple((xcol(i, j), d) for j in range(n)) + ((ybase + i, -1.0),)),
                "<=", 0.0))
        for j in range(n):
            rows.append(LinearConstraint(
                LinearExpr(tuple((xcol(i, j), 1.0) for i in range(m))), ">=", 1.0))
        obj = LinearExpr(tuple((xcol(i, j), float(cost[i, j]) * d)
                               for i in range(m) for j in range(n)))

    terms = tuple(
        ConcaveTerm((ybase + i,), ConcaveFunctionSpec("sqrtScaled", {"gamma": float(gamma[i])}))
        for i in range(m)
    )
    name = f"pt-{cfg.sourcing}-m{m}-n{n}-rho{cfg.rho}-s{cfg.seed}"
    return Problem(name, tuple(variables), obj, terms, tuple(rows))


def instance_metadata(cfg) -> dict:
    """Sidecar metadata written next to generated instances."""
    meta = {"generator_version": GENERATOR_VERSION, "seed": cfg.seed}
    if isinstance(cfg, CsinkConfig):
        meta.update({"generator": "csink", "n": cfg.n, "m": cfg.m,
                     "family": cfg.family, "r": cfg.r})
    else:
        meta.update({"generator": "pt", "m": cfg.m, "n": cfg.n,
                     "rho": cfg.rho, "sourcing": cfg.sourcing,
                     "demand": cfg.demand,
                     "capacity_feasible": cfg.capacity_feasible(),
                     "potentially_infeasible": cfg.sourcing == "single" and cfg.rho >= 0.9})
    return meta
