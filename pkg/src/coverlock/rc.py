"""Rank-and-cut: rank by cost-effectiveness ``v/w`` and cut the ranking.

Three variants share one ranking:

* :func:`rc_prefix_solve` keeps the best feasible prefix;
* :func:`rc_greedy_skip_solve` keeps the top ``K`` and then adds any
  affordable positive-value unit, skipping ones that do not fit;
* :func:`rc_with_target_count` treats exactly the top ``target`` units and
  ignores the budget (used to match another policy's coverage).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BinaryAllocation,
    ProblemInstance,
    SolveReport,
    budget_ok,
    validate_instance,
)
from .exceptions import CoreInfeasible, NoFeasibleCutoff, TargetOutOfRange
from .lp import ratio_order


@dataclass(frozen=True, eq=False)
class RankedOrder:
    """Units in ranking order with prefix sums.

    ``cum_value[k]`` and ``cum_cost[k]`` are the totals of the first ``k``
    ranked units, so both arrays have length ``n + 1``.
    """

    order: np.ndarray
    scores: np.ndarray
    cum_value: np.ndarray
    cum_cost: np.ndarray

    def threshold(self, k: int) -> float:
        """Ratio of the k-th ranked unit (the last one kept by a size-k cut)."""
        return float(self.scores[k - 1])


def rank_by_ratio(inst: ProblemInstance) -> RankedOrder:
    v, w = inst.values, inst.costs
    order = ratio_order(v, w)
    scores = (v / w)[order]
    cum_v = np.concatenate([[0.0], np.cumsum(v[order])])
    cum_w = np.concatenate([[0.0], np.cumsum(w[order])])
    for a in (order, scores, cum_v, cum_w):
        a.setflags(write=False)
    return RankedOrder(order, scores, cum_v, cum_w)


def rc_prefix_solve(inst: ProblemInstance) -> SolveReport:
    """Best-value prefix among those meeting budget and coverage.

    Raises
    ------
    NoFeasibleCutoff
        If no prefix is feasible. This can happen on feasible instances,
        when an expensive unit ranked early blocks every long enough prefix.
    """
    validate_instance(inst)
    ranked = rank_by_ratio(inst)
    W, K = inst.budget, inst.coverage_floor
    ks = np.arange(K, inst.n + 1)
    ok = ranked.cum_cost[ks] <= W + 1e-9 * W
    if not ok.any():
        raise NoFeasibleCutoff("no prefix of the ratio ranking satisfies both constraints")
    ks = ks[ok]
    k_star = int(ks[np.argmax(ranked.cum_value[ks])])  # argmax keeps the smallest k on ties
    alloc = BinaryAllocation.from_indices(inst, ranked.order[:k_star])
    return SolveReport.build("rc-prefix", inst, alloc, iterations=1,
                             diagnostics={"cutoff": k_star,
                                          "threshold": ranked.threshold(k_star) if k_star else None})


def rc_greedy_skip_solve(inst: ProblemInstance) -> SolveReport:
    """Top-``K`` core by ratio, then every affordable positive-value unit.

    Raises
    ------
    CoreInfeasible
        If the top ``K`` ranked units already exceed the budget.
    """
    validate_instance(inst)
    ranked = rank_by_ratio(inst)
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor
    core = ranked.order[:K]
    cost = math.fsum(w[core])
    if not budget_ok(cost, W):
        raise CoreInfeasible(f"top-{K} units by ratio cost {cost:g} > budget {W:g}")
    chosen = list(core)
    skipped = []
    for j in ranked.order[K:]:
        if v[j] <= 0:
            break
        if budget_ok(cost + w[j], W):
            chosen.append(j)
            cost += w[j]
        else:
            skipped.append(int(j))
    alloc = BinaryAllocation.from_indices(inst, chosen)
    return SolveReport.build("rc-skip", inst, alloc, iterations=1,
                             diagnostics={"skipped": skipped})


def rc_with_target_count(inst: ProblemInstance, target: int) -> SolveReport:
    """Treat exactly the top ``target`` units by ratio, ignoring the budget.

    A budget overrun is reported in ``diagnostics["budget_violated"]``.
    """
    validate_instance(inst)
    if not 0 <= target <= inst.n:
        raise TargetOutOfRange(f"target {target} outside [0, {inst.n}]")
    ranked = rank_by_ratio(inst)
    alloc = BinaryAllocation.from_indices(inst, ranked.order[:target])
    return SolveReport.build(
        "rc-target", inst, alloc, iterations=1,
        diagnostics={
            "budget_violated": not budget_ok(alloc.cost, inst.budget),
            "threshold": ranked.threshold(target) if target else None,
        },
    )
