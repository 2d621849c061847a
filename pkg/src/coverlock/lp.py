"""LP relaxation with a budget row and a coverage row.

The relaxation has only two global constraints, so it is solved directly:

* coverage ignored -> fractional knapsack over positive-value units;
* coverage binding -> mass pinned at ``K`` and the budget price found by
  bisection over ``lam`` on the top-``K`` selection by ``v - lam*w``.

An optimal extreme point has at most two coordinates strictly inside (0, 1).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    BUDGET_RTOL,
    FRACTIONAL_EPS,
    BinaryAllocation,
    DualPrices,
    FractionalAllocation,
    ProblemInstance,
    SolveReport,
    budget_ok,
    is_instance_feasible,
    validate_instance,
)
from .exceptions import Infeasible, RoundingInfeasible, TooLarge

MAX_BISECTION = 200
ORACLE_MAX_N = 10


@dataclass(frozen=True, eq=False)
class LpSolution:
    allocation: FractionalAllocation
    objective: float
    prices: Optional[DualPrices]
    fractional_indices: tuple
    phase: str = "A"
    iterations: int = 0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    def report(self, inst: ProblemInstance) -> SolveReport:
        return SolveReport.build(
            "lp", inst, self.allocation,
            iterations=self.iterations,
            dual_prices=self.prices,
            diagnostics={"phase": self.phase, "converged": self.converged},
        )


def ratio_order(values: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Descending ``v/w``; ties broken by higher ``v`` then lower index."""
    ratio = values / costs
    return np.lexsort((np.arange(values.shape[0]), -values, -ratio))


def _check(inst: ProblemInstance):
    validate_instance(inst)
    if not is_instance_feasible(inst):
        raise Infeasible("the cheapest coverage core already exceeds the budget")


def _phase_a(inst: ProblemInstance):
    v, w, W = inst.values, inst.costs, inst.budget
    order = ratio_order(v, w)
    pos = order[v[order] > 0]
    z = np.zeros(inst.n)
    cum = np.cumsum(w[pos])
    k = int(np.searchsorted(cum, W, side="right"))
    z[pos[:k]] = 1.0
    frac = 0.0
    if k < pos.shape[0]:
        spent = cum[k - 1] if k else 0.0
        frac = min(max((W - spent) / w[pos[k]], 0.0), 1.0)
        z[pos[k]] = frac
        lam = float(v[pos[k]] / w[pos[k]])
    else:
        lam = 0.0
    return z, lam, k + frac


def _top_k(v, w, k, lam):
    score = v - lam * w
    order = np.lexsort((np.arange(v.shape[0]), w, -score))
    return order[:k]


def _phase_b(inst: ProblemInstance):
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor

    def cost_at(lam):
        sel = _top_k(v, w, K, lam)
        return sel, math.fsum(w[sel])

    sel0, c0 = cost_at(0.0)
    if budget_ok(c0, W):
        z = np.zeros(inst.n)
        z[sel0] = 1.0
        nu = max(0.0, -float(np.min(v[sel0])))
        return z, DualPrices(0.0, nu), 0, True

    lo, hi = 0.0, 1.0
    while not budget_ok(cost_at(hi)[1], W):
        lo, hi = hi, 2.0 * hi
        if hi > 2.0 ** 60:  # unreachable for feasible instances
            raise Infeasible("no finite budget price reaches feasibility")

    iterations, converged = 0, False
    for iterations in range(1, MAX_BISECTION + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            converged = True
            break
        sel, c = cost_at(mid)
        if budget_ok(c, W):
            hi = mid
            if W - c <= 1e-10 * W:
                converged = True
                break
        else:
            lo = mid

    s_hi, c_hi = cost_at(hi)
    z = np.zeros(inst.n)
    if W - c_hi <= 1e-10 * W:
        z[s_hi] = 1.0
        marginal = s_hi[np.argmin(v[s_hi] - hi * w[s_hi])]
        nu = max(0.0, -float(v[marginal] - hi * w[marginal]))
        return z, DualPrices(hi, nu), iterations, converged

    s_lo = cost_at(lo)[0]
    common = np.intersect1d(s_lo, s_hi)
    swap = np.setxor1d(s_lo, s_hi)
    m = swap.shape[0] // 2
    swap = swap[np.lexsort((swap, w[swap]))]
    z[common] = 1.0
    remaining = W - math.fsum(w[common])
    # windows of m consecutive units in cost order have increasing cost; the
    # budget falls between two adjacent windows, which differ by one swap
    win = np.array([math.fsum(w[swap[s:s + m]]) for s in range(swap.shape[0] - m + 1)])
    s = int(np.searchsorted(win, remaining, side="right")) - 1
    s = min(max(s, 0), win.shape[0] - 2)
    z[swap[s + 1:s + m]] = 1.0
    out_unit, in_unit = swap[s], swap[s + m]
    theta = (remaining - win[s]) / (win[s + 1] - win[s])
    theta = min(max(theta, 0.0), 1.0)
    z[out_unit] = 1.0 - theta
    z[in_unit] = theta
    marginal = in_unit if theta >= 0.5 else out_unit
    nu = max(0.0, -float(v[marginal] - hi * w[marginal]))
    return z, DualPrices(hi, nu), iterations, converged


def solve_lp(inst: ProblemInstance) -> LpSolution:
    """Optimal extreme point of the relaxation plus shadow prices.

    Raises
    ------
    Infeasible
        If the ``K`` cheapest units exceed the budget.
    """
    _check(inst)
    z, lam, mass = _phase_a(inst)
    if mass >= inst.coverage_floor - FRACTIONAL_EPS:
        prices, phase, its, conv = DualPrices(lam, 0.0), "A", 0, True
    else:
        z, prices, its, conv = _phase_b(inst)
        phase = "B"
    alloc = FractionalAllocation.from_weights(inst, z)
    return LpSolution(alloc, alloc.value, prices, alloc.fractional_indices,
                      phase=phase, iterations=its, converged=conv)


def enumerate_extreme_points_oracle(inst: ProblemInstance) -> LpSolution:
    """Brute-force LP optimum for ``n <= 10``.

    Every vertex of the feasible polytope has at least ``n - 2`` coordinates
    at a bound. For each pair of free coordinates and each 0/1 assignment of
    the rest, all vertices of the resulting planar polygon are enumerated.
    Only meant as a test oracle; ``prices`` is left as ``None``.
    """
    validate_instance(inst)
    n = inst.n
    if n > ORACLE_MAX_N:
        raise TooLarge(f"oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    if not is_instance_feasible(inst):
        raise Infeasible("instance is infeasible")
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor
    tol = 1e-12
    best_val, best_z = -math.inf, None

    if n == 1:
        hi = min(1.0, W / w[0])
        cands = [z for z in (0.0, hi, 1.0) if z <= hi + tol and z >= K - tol]
        z1 = max(cands, key=lambda z: v[0] * z)
        alloc = FractionalAllocation.from_weights(inst, [z1])
        return LpSolution(alloc, alloc.value, None, alloc.fractional_indices, phase="oracle")

    bits = np.zeros((2 ** (n - 2), n - 2))
    for r, row in enumerate(itertools.product((0.0, 1.0), repeat=n - 2)):
        bits[r] = row
    for i, j in itertools.combinations(range(n), 2):
        rest = [k for k in range(n) if k != i and k != j]
        vr, wr, nr = bits @ v[rest], bits @ w[rest], bits.sum(axis=1)
        wp, kp = W - wr, K - nr
        wi, wj = w[i], w[j]
        pts = []
        for a in (0.0, 1.0):
            for b in (0.0, 1.0):
                pts.append((np.full_like(wp, a), np.full_like(wp, b)))
            pts.append((np.full_like(wp, a), (wp - wi * a) / wj))
            pts.append((np.full_like(wp, a), kp - a))
        for b in (0.0, 1.0):
            pts.append(((wp - wj * b) / wi, np.full_like(wp, b)))
            pts.append((kp - b, np.full_like(wp, b)))
        if wi != wj:
            zi = (wp - wj * kp) / (wi - wj)
            pts.append((zi, kp - zi))
        for zi, zj in pts:
            ok = ((zi >= -tol) & (zi <= 1 + tol) & (zj >= -tol) & (zj <= 1 + tol)
                  & (wr + wi * zi + wj * zj <= W + BUDGET_RTOL * W)
                  & (nr + zi + zj >= K - FRACTIONAL_EPS))
            if not ok.any():
                continue
            obj = np.where(ok, vr + v[i] * zi + v[j] * zj, -np.inf)
            r = int(np.argmax(obj))
            if obj[r] > best_val:
                best_val = float(obj[r])
                z = np.zeros(n)
                z[rest] = bits[r]
                z[i], z[j] = zi[r], zj[r]
                best_z = np.clip(z, 0.0, 1.0)
    alloc = FractionalAllocation.from_weights(inst, best_z)
    return LpSolution(alloc, alloc.value, None, alloc.fractional_indices, phase="oracle")


def round_lp_to_feasible(sol: LpSolution, inst: ProblemInstance) -> BinaryAllocation:
    """Round an extreme point to a feasible 0-1 allocation.

    Fractional coordinates are rounded down; if that drops coverage below the
    floor, rounded-down units are restored (highest value first) while the
    budget allows, and then the cheapest excluded units are added.
    """
    z = sol.allocation.weights
    d = (z >= 1 - FRACTIONAL_EPS).astype(np.int8)
    v, w, W = inst.values, inst.costs, inst.budget
    frac = [i for i in sol.fractional_indices]
    cost = math.fsum(w[d.astype(bool)])
    count = int(d.sum())
    frac.sort(key=lambda i: (-v[i], w[i], i))
    for i in frac:
        if count >= inst.coverage_floor:
            break
        if budget_ok(cost + w[i], W):
            d[i] = 1
            cost += w[i]
            count += 1
    if count < inst.coverage_floor:
        for i in inst.cost_order:
            if count >= inst.coverage_floor:
                break
            if d[i] == 0 and budget_ok(cost + w[i], W):
                d[i] = 1
                cost += w[i]
                count += 1
    if count < inst.coverage_floor:
        raise RoundingInfeasible("cannot restore coverage after rounding")
    return BinaryAllocation.from_decisions(inst, d)


def integrality_gap(inst: ProblemInstance) -> float:
    """LP optimum minus the exact 0-1 optimum; lies in ``[0, 2*v_max]``."""
    from .exact import solve_exact

    return solve_lp(inst).objective - solve_exact(inst).objective
