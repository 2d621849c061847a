"""Greedy-Lagrangian selection with a forced coverage core (GLC).

For a budget price ``lam`` units are ranked by ``a_i = v_i - lam*w_i``; the
top ``K`` form the forced core, and further positive-score units are added
in rank order while they fit the budget. ``lam`` is bisected until the
selection sits within ``eps*W`` of the budget frontier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .core import (
    BinaryAllocation,
    DualPrices,
    ProblemInstance,
    SolveReport,
    budget_ok,
    is_instance_feasible,
    validate_instance,
)
from .exceptions import BracketOverflow, Infeasible

LAMBDA_CAP = 2.0 ** 60

RAISE_LOWER = "raise-lambda-L"
LOWER_UPPER = "lower-lambda-U"
STOP = "augment-and-stop"
CONTINUE = "continue"


@dataclass(frozen=True)
class GlcConfig:
    eps: float = 0.05
    max_iterations: int = 100
    tie_break: str = "cost-then-index"

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tie_break != "cost-then-index":
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")


@dataclass(frozen=True)
class GlcIteration:
    t: int
    lam_lo: float
    lam_hi: float
    lam_mid: float
    core: Tuple[int, ...]
    core_cost: float
    core_value: float
    cost: float
    value: float
    action: str

    def to_line(self) -> str:
        core = ",".join(str(i + 1) for i in self.core)
        return (f"t={self.t} lambda_L={self.lam_lo:.6g} lambda_U={self.lam_hi:.6g} "
                f"lambda_M={self.lam_mid:.6g} core={{{core}}} core_B={self.core_cost:.6g} "
                f"core_V={self.core_value:.6g} B={self.cost:.6g} V={self.value:.6g} "
                f"action={self.action}")


@dataclass
class GlcTrace:
    initial_upper: float = 1.0
    iterations: List[GlcIteration] = field(default_factory=list)

    def to_text(self) -> str:
        """One line per iteration; units are printed 1-based."""
        lines = [f"lambda_U0={self.initial_upper:.6g}"]
        lines += [it.to_line() for it in self.iterations]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class GlcSelection:
    allocation: BinaryAllocation
    core_feasible: bool
    core: Tuple[int, ...]
    core_cost: float
    core_value: float
    scores: np.ndarray
    ranking: np.ndarray
    added: Tuple[int, ...] = ()
    rejected: Tuple[int, ...] = ()


def glc_rank(inst: ProblemInstance, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Scores ``v - lam*w`` and the ranking (descending score, cheaper, lower index)."""
    scores = inst.values - lam * inst.costs
    ranking = np.lexsort((np.arange(inst.n), inst.costs, -scores))
    return scores, ranking


def glc_select_at_lambda(inst: ProblemInstance, lam: float) -> GlcSelection:
    """Forced core plus greedy positive-score augmentation at price ``lam``.

    An infeasible core is reported through ``core_feasible`` rather than
    raised. Units that would overrun the budget are skipped and the scan
    continues; it stops at the first non-positive score.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor
    scores, ranking = glc_rank(inst, lam)
    core = ranking[:K]
    core_cost = math.fsum(w[core])
    core_value = math.fsum(v[core])
    d = np.zeros(inst.n, dtype=np.int8)
    d[core] = 1
    core_t = tuple(int(i) for i in core)
    if not budget_ok(core_cost, W):
        return GlcSelection(BinaryAllocation.from_decisions(inst, d), False, core_t,
                            core_cost, core_value, scores, ranking)
    cost = core_cost
    added, rejected = [], []
    for j in ranking[K:]:
        if scores[j] <= 0:
            break
        if budget_ok(cost + w[j], W):
            d[j] = 1
            cost += w[j]
            added.append(int(j))
        else:
            rejected.append(int(j))
    return GlcSelection(BinaryAllocation.from_decisions(inst, d), True, core_t,
                        core_cost, core_value, scores, ranking, tuple(added), tuple(rejected))


def glc_solve(inst: ProblemInstance, cfg: GlcConfig = GlcConfig()) -> Tuple[SolveReport, GlcTrace]:
    """Bisect the budget price until the GLC selection is near the frontier.

    Raises
    ------
    Infeasible
        If the ``K`` cheapest units exceed the budget.
    BracketOverflow
        If no upper price below ``2**60`` yields a feasible core.
    """
    validate_instance(inst)
    if not is_instance_feasible(inst):
        raise Infeasible("the cheapest coverage core already exceeds the budget")
    W, n = inst.budget, inst.n
    tol = cfg.eps * W

    lam_lo, lam_hi = 0.0, 1.0
    sel_hi = glc_select_at_lambda(inst, lam_hi)
    while not sel_hi.core_feasible:
        lam_hi *= 2.0
        if lam_hi > LAMBDA_CAP:
            raise BracketOverflow("upper budget price exceeded 2**60")
        sel_hi = glc_select_at_lambda(inst, lam_hi)
    trace = GlcTrace(initial_upper=lam_hi)
    # fallback if the frontier is never reached: best feasible selection seen
    best, best_lam = sel_hi, lam_hi
    chosen, chosen_lam = None, None

    for t in range(1, cfg.max_iterations + 1):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        if not lam_lo < lam_mid < lam_hi:
            break
        sel = glc_select_at_lambda(inst, lam_mid)
        alloc = sel.allocation
        if not sel.core_feasible:
            action = RAISE_LOWER
        elif W - alloc.cost <= tol or alloc.count == n:
            action = STOP
        elif alloc.cost < W - tol:
            action = LOWER_UPPER
        else:
            action = CONTINUE
        trace.iterations.append(GlcIteration(
            t, lam_lo, lam_hi, lam_mid, sel.core, sel.core_cost, sel.core_value,
            alloc.cost, alloc.value, action))
        if sel.core_feasible and alloc.value > best.allocation.value:
            best, best_lam = sel, lam_mid
        if action == RAISE_LOWER:
            lam_lo = lam_mid
        elif action == LOWER_UPPER:
            lam_hi = lam_mid
        elif action == STOP:
            chosen, chosen_lam = sel, lam_mid
            break

    converged = chosen is not None
    if not converged:
        chosen, chosen_lam = best, best_lam
    alloc = chosen.allocation
    # coverage price implied by the weakest selected score
    sel_scores = chosen.scores[alloc.decisions.astype(bool)]
    nu = max(0.0, -float(sel_scores.min())) if sel_scores.size else 0.0
    report = SolveReport.build(
        "glc", inst, alloc,
        iterations=len(trace.iterations),
        dual_prices=DualPrices(chosen_lam, nu),
        diagnostics={"converged": converged, "lambda": chosen_lam},
    )
    return report, trace


def glc_regret(inst: ProblemInstance, cfg: GlcConfig = GlcConfig()) -> float:
    """Exact optimum minus the GLC value (never negative)."""
    from .exact import solve_exact

    return solve_exact(inst).objective - glc_solve(inst, cfg)[0].objective
