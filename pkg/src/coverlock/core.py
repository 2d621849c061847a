"""Instance representation, feasibility predicates and threshold scoring.

Every solver in the package consumes a :class:`ProblemInstance`: a finite
0-1 knapsack with an extra minimum-cardinality (coverage) constraint::

    max  sum_i v_i pi_i
    s.t. sum_i w_i pi_i <= W,   sum_i pi_i >= K,   pi in {0,1}^n
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .exceptions import (
    CoverageOutOfRange,
    LengthMismatch,
    NonFiniteEntry,
    NonPositiveBudget,
    NonPositiveCost,
)

#: Relative slack allowed on the budget constraint.
BUDGET_RTOL = 1e-9
#: Band used to classify a fractional coordinate as strictly inside (0, 1).
FRACTIONAL_EPS = 1e-9


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


def budget_ok(cost: float, budget: float) -> bool:
    return cost <= budget + BUDGET_RTOL * budget


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Values, costs, total budget and coverage floor.

    Construction only coerces types; call :func:`validate_instance` to check
    the invariants (solvers do so on entry).
    """

    values: np.ndarray
    costs: np.ndarray
    budget: float
    coverage_floor: int

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "costs", _readonly(self.costs))
        object.__setattr__(self, "budget", float(self.budget))
        k = self.coverage_floor
        if isinstance(k, float) and k.is_integer():
            k = int(k)
        object.__setattr__(self, "coverage_floor", k)

    @classmethod
    def from_per_capita(cls, values, costs, budget_per_capita: float,
                        coverage_share: float) -> "ProblemInstance":
        """Build totals from per-capita inputs: ``W = n*C``, ``K = ceil(n*rho)``."""
        n = len(values)
        return cls(values, costs, n * float(budget_per_capita),
                   coverage_from_share(n, coverage_share))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @cached_property
    def v_max(self) -> float:
        return float(np.max(np.abs(self.values))) if self.n else 0.0

    @cached_property
    def w_min(self) -> float:
        return float(np.min(self.costs))

    @cached_property
    def w_max(self) -> float:
        return float(np.max(self.costs))

    @cached_property
    def cost_order(self) -> np.ndarray:
        """Indices sorted by increasing cost (stable)."""
        order = np.argsort(self.costs, kind="stable")
        order.setflags(write=False)
        return order

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "costs": self.costs.tolist(),
            "budget": self.budget,
            "coverage_floor": self.coverage_floor,
        }


def coverage_from_share(n: int, share: float) -> int:
    # guard against n*rho landing a hair above an integer (e.g. 50*0.3)
    return int(math.ceil(n * float(share) - 1e-9))


def validate_instance(inst: ProblemInstance) -> ProblemInstance:
    """Return ``inst`` unchanged if it satisfies every instance invariant.

    Raises
    ------
    LengthMismatch, NonFiniteEntry, NonPositiveCost, NonPositiveBudget,
    CoverageOutOfRange
    """
    v, w = inst.values, inst.costs
    if v.shape != w.shape:
        raise LengthMismatch(f"{v.shape[0]} values but {w.shape[0]} costs")
    if v.shape[0] < 1:
        raise LengthMismatch("instance must contain at least one unit")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))
            and math.isfinite(inst.budget)):
        raise NonFiniteEntry("values, costs and budget must be finite")
    if np.any(w <= 0):
        bad = int(np.flatnonzero(w <= 0)[0])
        raise NonPositiveCost(f"cost of unit {bad} is {w[bad]!r}; costs must be > 0")
    if inst.budget <= 0:
        raise NonPositiveBudget(f"budget must be > 0, got {inst.budget!r}")
    k = inst.coverage_floor
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k <= v.shape[0]:
        raise CoverageOutOfRange(f"coverage floor {k!r} not an integer in [0, {v.shape[0]}]")
    return inst


def min_coverage_cost(inst: ProblemInstance) -> float:
    """Sum of the ``K`` smallest costs (0 when ``K == 0``)."""
    k = inst.coverage_floor
    if k == 0:
        return 0.0
    return math.fsum(inst.costs[inst.cost_order[:k]])


def is_instance_feasible(inst: ProblemInstance) -> bool:
    return budget_ok(min_coverage_cost(inst), inst.budget)


@dataclass(frozen=True)
class DualPrices:
    """Shadow prices: ``lam`` per budget unit, ``nu`` per treated unit."""

    lam: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not (self.lam >= 0 and self.nu >= 0):
            raise ValueError(f"dual prices must be non-negative, got ({self.lam}, {self.nu})")


def lagrangian_score(inst: ProblemInstance, i: int, prices: DualPrices) -> float:
    return float(inst.values[i] - prices.lam * inst.costs[i] + prices.nu)


def lagrangian_scores(inst: ProblemInstance, prices: DualPrices) -> np.ndarray:
    return inst.values - prices.lam * inst.costs + prices.nu


@dataclass(frozen=True, eq=False)
class BinaryAllocation:
    decisions: np.ndarray
    value: float
    cost: float
    count: int

    @classmethod
    def from_decisions(cls, inst: ProblemInstance, decisions) -> "BinaryAllocation":
        d = np.asarray(decisions)
        if d.shape != (inst.n,):
            raise LengthMismatch(f"allocation has shape {d.shape}, instance has n={inst.n}")
        if not np.all((d == 0) | (d == 1)):
            raise ValueError("binary allocation entries must be 0 or 1")
        d = _readonly(d, dtype=np.int8)
        mask = d.astype(bool)
        return cls(d, math.fsum(inst.values[mask]), math.fsum(inst.costs[mask]),
                   int(mask.sum()))

    @classmethod
    def from_indices(cls, inst: ProblemInstance, indices) -> "BinaryAllocation":
        d = np.zeros(inst.n, dtype=np.int8)
        d[list(indices)] = 1
        return cls.from_decisions(inst, d)

    @property
    def selected(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.decisions))

    def __eq__(self, other):
        if not isinstance(other, BinaryAllocation):
            return NotImplemented
        return np.array_equal(self.decisions, other.decisions)

    def __hash__(self):
        return hash(self.decisions.tobytes())


@dataclass(frozen=True, eq=False)
class FractionalAllocation:
    weights: np.ndarray
    value: float
    cost: float
    mass: float

    @classmethod
    def from_weights(cls, inst: ProblemInstance, weights) -> "FractionalAllocation":
        z = np.asarray(weights, dtype=float)
        if z.shape != (inst.n,):
            raise LengthMismatch(f"allocation has shape {z.shape}, instance has n={inst.n}")
        if np.any(z < -FRACTIONAL_EPS) or np.any(z > 1 + FRACTIONAL_EPS):
            raise ValueError("fractional weights must lie in [0, 1]")
        z = _readonly(np.clip(z, 0.0, 1.0))
        return cls(z, math.fsum(inst.values * z), math.fsum(inst.costs * z), math.fsum(z))

    @property
    def fractional_indices(self) -> tuple:
        z = self.weights
        inside = (z > FRACTIONAL_EPS) & (z < 1 - FRACTIONAL_EPS)
        return tuple(int(i) for i in np.flatnonzero(inside))


Allocation = Union[BinaryAllocation, FractionalAllocation]


def threshold_policy(inst: ProblemInstance, prices: DualPrices) -> BinaryAllocation:
    """Treat every unit whose Lagrangian score is >= 0 (ties are treated)."""
    return BinaryAllocation.from_decisions(inst, (lagrangian_scores(inst, prices) >= 0).astype(np.int8))


def allocation_metrics(inst: ProblemInstance, alloc) -> tuple:
    """Return ``(value, cost, count, feasible)`` for a binary allocation."""
    if not isinstance(alloc, BinaryAllocation):
        alloc = BinaryAllocation.from_decisions(inst, alloc)
    elif alloc.decisions.shape != (inst.n,):
        raise LengthMismatch(f"allocation has length {alloc.decisions.shape[0]}, instance has n={inst.n}")
    feasible = budget_ok(alloc.cost, inst.budget) and alloc.count >= inst.coverage_floor
    return alloc.value, alloc.cost, alloc.count, feasible


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of any solver.

    ``optimal`` is only meaningful for the exact solver; it is False when the
    node limit stopped the search early.
    """

    method: str
    allocation: Allocation
    objective: float
    budget_used: float
    coverage_used: float
    budget_binding: bool
    coverage_binding: bool
    iterations: int = 0
    fractional_count: int = 0
    dual_prices: Optional[DualPrices] = None
    optimal: bool = True
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def build(cls, method: str, inst: ProblemInstance, alloc: Allocation, **kw) -> "SolveReport":
        if isinstance(alloc, BinaryAllocation):
            used = alloc.count
            cov_bind = alloc.count == inst.coverage_floor
            frac = 0
        else:
            used = alloc.mass
            cov_bind = abs(alloc.mass - inst.coverage_floor) <= FRACTIONAL_EPS
            frac = len(alloc.fractional_indices)
        kw.setdefault("fractional_count", frac)
        return cls(
            method=method,
            allocation=alloc,
            objective=alloc.value,
            budget_used=alloc.cost,
            coverage_used=used,
            budget_binding=inst.budget - alloc.cost <= BUDGET_RTOL * inst.budget,
            coverage_binding=cov_bind,
            **kw,
        )

    def to_dict(self) -> dict:
        alloc = self.allocation
        if isinstance(alloc, BinaryAllocation):
            dec = [int(x) for x in alloc.decisions]
        else:
            dec = [float(x) for x in alloc.weights]
        out = {
            "method": self.method,
            "decisions": dec,
            "objective": self.objective,
            "budget_used": self.budget_used,
            "coverage_used": self.coverage_used,
            "budget_binding": self.budget_binding,
            "coverage_binding": self.coverage_binding,
            "iterations": self.iterations,
            "fractional_count": self.fractional_count,
            "optimal": self.optimal,
        }
        if self.dual_prices is not None:
            out["dual_prices"] = {"lambda": self.dual_prices.lam, "nu": self.dual_prices.nu}
        return out

