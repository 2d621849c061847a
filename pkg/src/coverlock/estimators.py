"""scikit-learn style wrappers around the solvers.

Each allocator takes ``X`` with two columns ``[value, cost]``. ``fit`` solves
the allocation problem on those units; ``predict`` applies the learned
threshold rule to (possibly new) units, which is how a fitted policy is
deployed on a fresh population.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import rc_threshold
from .core import ProblemInstance, coverage_from_share
from .exact import DEFAULT_NODE_LIMIT, solve_exact
from .glc import GlcConfig, glc_solve
from .lp import solve_lp
from .rc import rc_greedy_skip_solve, rc_prefix_solve


def _check_units(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_min_samples=1)
    if X.shape[1] != 2:
        raise ValueError(f"X must have two columns [value, cost], got {X.shape[1]}")
    return X


class _AllocatorBase(BaseEstimator):
    """Shared constraint handling; subclasses implement ``_solve``."""

    def __init__(self, budget=None, coverage_floor=None, budget_per_capita=None,
                 coverage_share=None):
        self.budget = budget
        self.coverage_floor = coverage_floor
        self.budget_per_capita = budget_per_capita
        self.coverage_share = coverage_share

    def _instance(self, X) -> ProblemInstance:
        n = X.shape[0]
        if (self.budget is None) == (self.budget_per_capita is None):
            raise ValueError("set exactly one of budget and budget_per_capita")
        if (self.coverage_floor is None) == (self.coverage_share is None):
            raise ValueError("set exactly one of coverage_floor and coverage_share")
        W = self.budget if self.budget is not None else n * self.budget_per_capita
        K = (self.coverage_floor if self.coverage_floor is not None
             else coverage_from_share(n, self.coverage_share))
        return ProblemInstance(X[:, 0], X[:, 1], W, K)

    def fit(self, X, y=None):
        X = _check_units(X)
        inst = self._instance(X)
        self.instance_ = inst
        self.report_ = self._solve(inst)
        self.allocation_ = self.report_.allocation
        self.prices_ = self.report_.dual_prices
        self.n_features_in_ = 2
        return self

    def decision_function(self, X) -> np.ndarray:
        """Margin ``v - lam*w + nu`` of each unit under the fitted prices."""
        check_is_fitted(self, "report_")
        X = _check_units(X)
        if self.prices_ is None:
            raise AttributeError("this allocator has no dual prices")
        return X[:, 0] - self.prices_.lam * X[:, 1] + self.prices_.nu

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int8)

    def fit_predict(self, X, y=None) -> np.ndarray:
        """Fit and return the solved allocation of the training units."""
        self.fit(X)
        return np.asarray(self.allocation_.decisions, dtype=np.int8)


class ExactAllocator(_AllocatorBase):
    def __init__(self, budget=None, coverage_floor=None, budget_per_capita=None,
                 coverage_share=None, node_limit=DEFAULT_NODE_LIMIT):
        super().__init__(budget, coverage_floor, budget_per_capita, coverage_share)
        self.node_limit = node_limit

    def _solve(self, inst):
        return solve_exact(inst, node_limit=self.node_limit)


class LPAllocator(_AllocatorBase):
    """LP relaxation; ``fit_predict`` returns the fractional weights."""

    def _solve(self, inst):
        return solve_lp(inst).report(inst)

    def fit_predict(self, X, y=None) -> np.ndarray:
        self.fit(X)
        return np.asarray(self.allocation_.weights, dtype=float)


class GLCAllocator(_AllocatorBase):
    def __init__(self, budget=None, coverage_floor=None, budget_per_capita=None,
                 coverage_share=None, eps=0.05, max_iterations=100):
        super().__init__(budget, coverage_floor, budget_per_capita, coverage_share)
        self.eps = eps
        self.max_iterations = max_iterations

    def _solve(self, inst):
        report, self.trace_ = glc_solve(inst, GlcConfig(self.eps, self.max_iterations))
        return report


class RankAndCutAllocator(_AllocatorBase):
    """Ratio ranking; ``predict`` treats units whose ``v/w`` clears the cut."""

    def __init__(self, budget=None, coverage_floor=None, budget_per_capita=None,
                 coverage_share=None, variant="prefix"):
        super().__init__(budget, coverage_floor, budget_per_capita, coverage_share)
        self.variant = variant

    def _solve(self, inst):
        if self.variant == "prefix":
            report = rc_prefix_solve(inst)
        elif self.variant == "skip":
            report = rc_greedy_skip_solve(inst)
        else:
            raise ValueError(f"variant must be 'prefix' or 'skip', got {self.variant!r}")
        self.threshold_ = rc_threshold(inst, report.allocation)
        return report

    def decision_function(self, X) -> np.ndarray:
        """Ratio minus the fitted cut (``-inf`` everywhere if nothing was treated)."""
        check_is_fitted(self, "report_")
        X = _check_units(X)
        ratio = X[:, 0] / X[:, 1]
        if self.threshold_ is None:
            return np.full(X.shape[0], -np.inf)
        return ratio - self.threshold_


__all__ = ["ExactAllocator", "LPAllocator", "GLCAllocator", "RankAndCutAllocator"]
